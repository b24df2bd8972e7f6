#include "countforge/ttn.hpp"

#include <cmath>
#include <string>

#include "countforge/errors.hpp"

namespace countforge {

namespace {

// Balanced integer partition of `length` into `parts` segments.
std::vector<int> partition(int length, int parts) {
    std::vector<int> sizes(static_cast<std::size_t>(parts), length / parts);
    for (int k = 0; k < length % parts; ++k) ++sizes[static_cast<std::size_t>(k)];
    return sizes;
}

}  // namespace

void TtnConfig::validate() const {
    if (tiles_per_side < 1) throw InvalidInput("tiles per side M must be >= 1");
    if (!(area_threshold > 0.0) || !std::isfinite(area_threshold)) {
        throw InvalidInput("area threshold T must be > 0");
    }
}

bool should_normalize(const std::vector<BoundingBox>& reference_boxes, int query_w, int query_h,
                      const TtnConfig& config) {
    config.validate();
    if (reference_boxes.empty()) throw InvalidInput("at least one reference box is required");
    if (query_w < 1 || query_h < 1) throw InvalidInput("query dimensions must be positive");
    double area_sum = 0.0;
    for (const auto& b : reference_boxes) {
        validate(b);
        area_sum += b.area();
    }
    const double mean_area = area_sum / static_cast<double>(reference_boxes.size());
    const double query_area = static_cast<double>(query_w) * static_cast<double>(query_h);
    return mean_area / query_area < config.area_threshold;
}

TtnPlan plan_tiles(int query_w, int query_h, const TtnConfig& config) {
    config.validate();
    const int m = config.tiles_per_side;
    if (query_w < m || query_h < m) {
        throw InvalidInput("query " + std::to_string(query_w) + "x" + std::to_string(query_h) +
                           " is smaller than " + std::to_string(m) + " tiles per side");
    }
    const auto widths = partition(query_w, m);
    const auto heights = partition(query_h, m);

    TtnPlan plan;
    plan.normalize = m > 1;
    plan.tiles.reserve(static_cast<std::size_t>(m) * m);
    int y = 0;
    for (int h : heights) {
        int x = 0;
        for (int w : widths) {
            plan.tiles.push_back({x, y, w, h, static_cast<double>(query_w) / w,
                                  static_cast<double>(query_h) / h});
            x += w;
        }
        y += h;
    }
    return plan;
}

TtnPlan make_plan(const std::vector<BoundingBox>& reference_boxes, int query_w, int query_h,
                  const TtnConfig& config) {
    if (should_normalize(reference_boxes, query_w, query_h, config)) {
        return plan_tiles(query_w, query_h, config);
    }
    TtnPlan plan;
    plan.normalize = false;
    plan.tiles.push_back({0, 0, query_w, query_h, 1.0, 1.0});
    return plan;
}

double aggregate_counts(const TtnPlan& plan, std::span<const double> tile_counts) {
    if (tile_counts.size() != plan.tiles.size()) {
        throw InvalidInput("got " + std::to_string(tile_counts.size()) + " tile counts for " +
                           std::to_string(plan.tiles.size()) + " tiles");
    }
    double total = 0.0;
    for (double c : tile_counts) {
        if (!std::isfinite(c)) throw NumericalError("tile count is not finite");
        total += c;
    }
    return total;
}

}  // namespace countforge
