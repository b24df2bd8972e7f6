#pragma once

#include <span>
#include <vector>

#include "countforge/core.hpp"

namespace countforge {

inline constexpr int kDefaultTilesPerSide = 8;
inline constexpr double kDefaultAreaThreshold = 0.0002;

struct TtnConfig {
    int tiles_per_side = kDefaultTilesPerSide;            ///< M
    double area_threshold = kDefaultAreaThreshold;        ///< T

    void validate() const;
};

/// One tile of the query, in query pixels, with the factors that resize it
/// back to the full query size before it is handed to a counter.
struct Tile {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
    double scale_x = 1.0;
    double scale_y = 1.0;
};

struct TtnPlan {
    bool normalize = false;
    std::vector<Tile> tiles;
};

/// True iff mean(reference box area) / (query_w * query_h) < T.
bool should_normalize(const std::vector<BoundingBox>& reference_boxes, int query_w, int query_h,
                      const TtnConfig& config = {});

/// M x M tiles partitioning the query; sizes along each axis differ by at
/// most one pixel, with the larger tiles first.
TtnPlan plan_tiles(int query_w, int query_h, const TtnConfig& config = {});

/// Tiled plan when should_normalize holds, otherwise one full-frame tile.
TtnPlan make_plan(const std::vector<BoundingBox>& reference_boxes, int query_w, int query_h,
                  const TtnConfig& config = {});

/// Sum of the per-tile counts, accumulated in tile order.
double aggregate_counts(const TtnPlan& plan, std::span<const double> tile_counts);

}  // namespace countforge
