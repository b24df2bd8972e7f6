#include "countforge/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "countforge/errors.hpp"

namespace countforge {

namespace {

void check_record(const CountRecord& r) {
    if (!std::isfinite(r.gt) || r.gt < 0.0 || r.gt != std::floor(r.gt)) {
        throw InvalidInput("record '" + r.id + "': ground truth must be a nonnegative integer");
    }
    if (!std::isfinite(r.pred) || r.pred < 0.0) {
        throw InvalidInput("record '" + r.id + "': prediction must be finite and nonnegative");
    }
}

}  // namespace

MetricReport compute_metrics(const std::vector<CountRecord>& records) {
    if (records.empty()) throw InvalidInput("metrics need at least one record");
    for (const auto& r : records) {
        check_record(r);
        if (r.gt == 0.0) throw ZeroCountError(r.id);
    }

    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double rel_abs_sum = 0.0;
    double rel_sq_sum = 0.0;
    for (const auto& r : records) {
        const double err = r.pred - r.gt;
        abs_sum += std::abs(err);
        sq_sum += err * err;
        rel_abs_sum += std::abs(err) / r.gt;
        rel_sq_sum += err * err / r.gt;
    }
    const double count = static_cast<double>(records.size());
    MetricReport out;
    out.count = records.size();
    out.mae = abs_sum / count;
    out.rmse = std::sqrt(sq_sum / count);
    out.nae = rel_abs_sum / count;
    out.sre = std::sqrt(rel_sq_sum / count);
    return out;
}

ExclusionReport exclusion_report(const std::vector<CountRecord>& records, std::size_t k) {
    if (k >= records.size()) {
        throw InvalidInput("cannot exclude " + std::to_string(k) + " of " +
                           std::to_string(records.size()) + " records");
    }
    ExclusionReport out;
    out.full = compute_metrics(records);

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        if (records[l].gt != records[r].gt) return records[l].gt > records[r].gt;
        return records[l].id < records[r].id;
    });
    std::vector<char> drop(records.size(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        drop[order[i]] = 1;
        out.dropped_ids.push_back(records[order[i]].id);
    }
    std::vector<CountRecord> kept;
    kept.reserve(records.size() - k);
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!drop[i]) kept.push_back(records[i]);
    }
    out.excluded = compute_metrics(kept);
    return out;
}

std::vector<HistogramBin> bin_distribution(const std::vector<CountRecord>& records,
                                           std::size_t n_bins) {
    if (n_bins < 1) throw InvalidInput("histogram needs at least one bin");
    if (records.empty()) return {};
    for (const auto& r : records) check_record(r);

    const auto [lo_it, hi_it] = std::minmax_element(
        records.begin(), records.end(),
        [](const CountRecord& l, const CountRecord& r) { return l.gt < r.gt; });
    const double lo = lo_it->gt;
    const double hi = hi_it->gt;
    const double width = (hi - lo) / static_cast<double>(n_bins);

    std::vector<HistogramBin> bins(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        bins[b].low = lo + width * static_cast<double>(b);
        bins[b].high = b + 1 == n_bins ? hi : lo + width * static_cast<double>(b + 1);
    }
    for (const auto& r : records) {
        std::size_t b = 0;
        if (width > 0.0) {
            b = static_cast<std::size_t>(std::floor((r.gt - lo) / width));
            b = std::min(b, n_bins - 1);
        }
        ++bins[b].count;
    }
    return bins;
}

}  // namespace countforge
