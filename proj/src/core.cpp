#include "countforge/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "countforge/errors.hpp"

namespace countforge {

DensityGrid::DensityGrid(int height, int width, int stride)
    : DensityGrid(height, width, stride,
                  std::vector<double>(static_cast<std::size_t>(std::max(height, 0)) *
                                      static_cast<std::size_t>(std::max(width, 0)),
                                      0.0)) {}

DensityGrid::DensityGrid(int height, int width, int stride, std::vector<double> values)
    : height_(height), width_(width), stride_(stride), values_(std::move(values)) {
    if (height < 1 || width < 1) {
        throw InvalidInput("density grid dimensions must be positive");
    }
    if (stride < 1) {
        throw InvalidInput("density grid stride must be >= 1");
    }
    if (values_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
        throw InvalidInput("density grid has " + std::to_string(values_.size()) +
                           " values, expected height*width = " +
                           std::to_string(static_cast<long long>(height) * width));
    }
    for (double v : values_) {
        if (!std::isfinite(v) || v < 0.0) {
            throw InvalidInput("density grid values must be finite and nonnegative");
        }
    }
}

void validate(const PointSet& points) {
    for (const auto& p : points.points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0) {
            throw InvalidInput("point coordinates must be finite and nonnegative");
        }
    }
}

void validate(const BoundingBox& box) {
    if (!std::isfinite(box.x1) || !std::isfinite(box.y1) || !std::isfinite(box.x2) ||
        !std::isfinite(box.y2)) {
        throw InvalidInput("bounding box coordinates must be finite");
    }
    if (!(box.x2 > box.x1) || !(box.y2 > box.y1)) {
        throw InvalidInput("bounding box must have x2 > x1 and y2 > y1");
    }
}

void validate(const AnnotatedImage& image) {
    const auto where = [&](const std::string& what) {
        return "image '" + image.id + "': " + what;
    };
    if (image.width < 1 || image.height < 1) {
        throw InvalidInput(where("dimensions must be positive"));
    }
    try {
        validate(image.points);
        for (const auto& b : image.boxes) validate(b);
    } catch (const InvalidInput& e) {
        throw InvalidInput(where(e.what()));
    }
    for (const auto& p : image.points.points) {
        if (p.x > image.width || p.y > image.height) {
            throw InvalidInput(where("point lies outside the image"));
        }
    }
    for (const auto& b : image.boxes) {
        if (b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > image.width || b.y2 > image.height) {
            throw InvalidInput(where("box lies outside the image"));
        }
    }
}

double total_count(const DensityGrid& grid) {
    const auto v = grid.values();
    return std::accumulate(v.begin(), v.end(), 0.0);
}

DensityGrid render_gaussian_density(const PointSet& points, int height, int width, int stride,
                                    double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw InvalidInput("gaussian sigma must be positive");
    }
    if (height < 1 || width < 1 || stride < 1) {
        throw InvalidInput("grid dimensions and stride must be positive");
    }
    validate(points);
    const double extent_x = static_cast<double>(width) * stride;
    const double extent_y = static_cast<double>(height) * stride;

    std::vector<double> values(static_cast<std::size_t>(height) * width, 0.0);
    const int radius = static_cast<int>(std::ceil(4.0 * sigma)) + 1;
    std::vector<double> logw;

    for (const auto& p : points.points) {
        if (p.x > extent_x || p.y > extent_y) {
            throw InvalidInput("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                               ") lies outside the grid extent");
        }
        const double gx = p.x / stride;
        const double gy = p.y / stride;
        const int cc = std::clamp(static_cast<int>(std::floor(gx)), 0, width - 1);
        const int cr = std::clamp(static_cast<int>(std::floor(gy)), 0, height - 1);
        const int r0 = std::max(0, cr - radius), r1 = std::min(height - 1, cr + radius);
        const int c0 = std::max(0, cc - radius), c1 = std::min(width - 1, cc + radius);

        // Log-weights with the max subtracted, so very small sigmas still put
        // all mass on the nearest cell instead of underflowing to nothing.
        logw.clear();
        double max_logw = -std::numeric_limits<double>::infinity();
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double dx = c + 0.5 - gx;
                const double dy = r + 0.5 - gy;
                const double lw = -(dx * dx + dy * dy) / (2.0 * sigma * sigma);
                logw.push_back(lw);
                max_logw = std::max(max_logw, lw);
            }
        }
        double norm = 0.0;
        for (double& lw : logw) {
            lw = std::exp(lw - max_logw);
            norm += lw;
        }
        std::size_t k = 0;
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                values[static_cast<std::size_t>(r) * width + c] += logw[k++] / norm;
            }
        }
    }
    return DensityGrid(height, width, stride, std::move(values));
}

PointSet points_to_grid_frame(const PointSet& points, double stride) {
    if (!(stride > 0.0)) {
        throw InvalidInput("stride must be positive");
    }
    PointSet out;
    out.class_label = points.class_label;
    out.points.reserve(points.size());
    for (const auto& p : points.points) {
        out.points.push_back({p.x / stride, p.y / stride});
    }
    return out;
}

}  // namespace countforge
