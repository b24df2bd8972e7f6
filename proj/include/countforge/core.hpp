#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace countforge {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Continuous 2-D point annotations (one dot per object), optionally tagged
/// with the category they belong to.
struct PointSet {
    std::vector<Point> points;
    std::optional<std::string> class_label;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }
};

/// Nonnegative mass grid stored row-major. Each value is mass per cell, so
/// the sum of all cells is the object count regardless of stride.
class DensityGrid {
public:
    DensityGrid() = default;

    /// All-zero grid.
    DensityGrid(int height, int width, int stride = 4);

    /// Throws InvalidInput if the value count does not match the shape or any
    /// value is negative or non-finite.
    DensityGrid(int height, int width, int stride, std::vector<double> values);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int stride() const noexcept { return stride_; }
    std::size_t cells() const noexcept { return values_.size(); }

    double at(int row, int col) const { return values_[index(row, col)]; }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(col);
    }

    int height_ = 0;
    int width_ = 0;
    int stride_ = 4;
    std::vector<double> values_;
};

struct BoundingBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const noexcept { return x2 - x1; }
    double height() const noexcept { return y2 - y1; }
    double area() const noexcept { return width() * height(); }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Query image record: geometry and annotations only, no pixel data.
struct AnnotatedImage {
    std::string id;
    int width = 0;
    int height = 0;
    std::string class_label;
    PointSet points;
    std::vector<BoundingBox> boxes;

    std::size_t gt_count() const noexcept { return points.size(); }
};

/// Default kernel width, in grid cells, for ground-truth density rendering.
inline constexpr double kDefaultSigma = 1.0;
/// Output resolution of the density head relative to the input image.
inline constexpr int kDefaultStride = 4;

void validate(const PointSet& points);
void validate(const BoundingBox& box);
/// Checks positive dimensions, a valid box list and that every point and box
/// lies inside [0,width]x[0,height].
void validate(const AnnotatedImage& image);

double total_count(const DensityGrid& grid);

/// Renders one isotropic Gaussian per point, sampled at cell centers and
/// renormalized so each point contributes exactly unit mass inside the grid.
/// Points are given in source pixels; the grid covers height*stride by
/// width*stride source pixels.
DensityGrid render_gaussian_density(const PointSet& points, int height, int width, int stride,
                                    double sigma = kDefaultSigma);

PointSet points_to_grid_frame(const PointSet& points, double stride);

}  // namespace countforge
