#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace countforge {

struct CountRecord {
    std::string id;
    double gt = 0.0;    ///< ground-truth count, a nonnegative integer
    double pred = 0.0;  ///< predicted count
};

struct MetricReport {
    std::size_t count = 0;  ///< number of records L
    double mae = 0.0;
    double rmse = 0.0;
    double nae = 0.0;
    double sre = 0.0;
};

/// MAE, RMSE, NAE and SRE over all records.
///
/// Throws InvalidInput for an empty list or malformed record and
/// ZeroCountError for the first record whose ground truth is zero.
MetricReport compute_metrics(const std::vector<CountRecord>& records);

struct ExclusionReport {
    MetricReport full;
    MetricReport excluded;
    std::vector<std::string> dropped_ids;
};

/// Metrics before and after dropping the k records with the largest ground
/// truth. Ties are broken by ascending id, so the lexicographically smaller id
/// is dropped first. Requires k < L.
ExclusionReport exclusion_report(const std::vector<CountRecord>& records, std::size_t k);

struct HistogramBin {
    double low = 0.0;
    double high = 0.0;
    std::size_t count = 0;
};

/// Equal-width histogram of ground-truth counts over [min gt, max gt]. Bins
/// are half-open except the last, which includes its top edge. When all
/// counts are equal every record falls in the first bin.
std::vector<HistogramBin> bin_distribution(const std::vector<CountRecord>& records,
                                           std::size_t n_bins);

}  // namespace countforge
