#include "countforge/transport.hpp"

#include <algorithm>
#include <cmath>

#include "countforge/errors.hpp"

namespace countforge {

CoordList grid_coords(int height, int width) {
    if (height < 1 || width < 1) {
        throw InvalidInput("grid dimensions must be >= 1");
    }
    const double d = std::max(height, width);
    CoordList coords;
    coords.reserve(static_cast<std::size_t>(height) * width);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            coords.push_back({(c + 0.5) / d, (r + 0.5) / d});
        }
    }
    return coords;
}

PointSet normalize_to_unit_frame(const PointSet& grid_points, int height, int width) {
    if (height < 1 || width < 1) {
        throw InvalidInput("grid dimensions must be >= 1");
    }
    const double d = std::max(height, width);
    PointSet out;
    out.class_label = grid_points.class_label;
    out.points.reserve(grid_points.size());
    for (const auto& p : grid_points.points) {
        out.points.push_back({p.x / d, p.y / d});
    }
    return out;
}

CostMatrix cost_matrix(const CoordList& cells, const PointSet& points, double eta) {
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        throw InvalidInput("eta must be positive");
    }
    const auto in_unit = [](const Point& p) {
        return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.x <= 1.0 &&
               p.y >= 0.0 && p.y <= 1.0;
    };
    for (const auto& c : cells) {
        if (!in_unit(c)) throw InvalidInput("cell coordinates must lie in the unit square");
    }
    for (const auto& p : points.points) {
        if (!in_unit(p)) throw InvalidInput("point coordinates must lie in the unit square");
    }

    CostMatrix cost;
    cost.n = cells.size();
    cost.m = points.size();
    cost.values.resize(cost.n * cost.m);
    for (std::size_t i = 0; i < cost.n; ++i) {
        for (std::size_t j = 0; j < cost.m; ++j) {
            const double dist =
                std::hypot(cells[i].x - points.points[j].x, cells[i].y - points.points[j].y);
            cost.values[i * cost.m + j] = std::exp(dist / eta);
        }
    }
    return cost;
}

CostMatrix grid_cost_matrix(int height, int width, const PointSet& grid_points, double eta) {
    return cost_matrix(grid_coords(height, width),
                       normalize_to_unit_frame(grid_points, height, width), eta);
}

}  // namespace countforge
