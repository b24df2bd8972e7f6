#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "countforge/core.hpp"

namespace countforge {

/// Default bandwidth of the exponential distance cost.
inline constexpr double kDefaultEta = 0.6;

/// Cell-center locations in the unit-square frame, one per grid cell,
/// row-major.
using CoordList = std::vector<Point>;

/// Dense n x m transport cost between grid cells (rows) and annotation
/// points (columns), row-major.
struct CostMatrix {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t j) const { return values[i * m + j]; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * m, m}; }
};

/// Cell (r, c) maps to ((c + 0.5) / D, (r + 0.5) / D) with D = max(height, width).
CoordList grid_coords(int height, int width);

/// Maps points given in grid-cell units (see points_to_grid_frame) into the
/// same unit-square frame used by grid_coords.
PointSet normalize_to_unit_frame(const PointSet& grid_points, int height, int width);

/// C_ij = exp(|x_i - y_j|_2 / eta). Both inputs must already be in the
/// unit-square frame.
CostMatrix cost_matrix(const CoordList& cells, const PointSet& points, double eta = kDefaultEta);

/// Convenience: cost between every cell of a height x width grid and points
/// given in grid-cell units.
CostMatrix grid_cost_matrix(int height, int width, const PointSet& grid_points,
                            double eta = kDefaultEta);

}  // namespace countforge
