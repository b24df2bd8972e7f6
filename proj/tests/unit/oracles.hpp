#pragma once

// Reference computations written independently of the library code paths they
// check. Kept deliberately naive.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "countforge/core.hpp"
#include "countforge/metrics.hpp"
#include "countforge/mosaic.hpp"

namespace oracle {

// Minimizes the 1 x 1 objective
//   c p + eps p (ln p - 1) + tau (p - a)^2 + tau |p - 1|
// over p >= 0 by ternary search (the function is convex).
inline double scalar_gl(double c, double a, double eps, double tau, double* argmin = nullptr) {
    auto f = [&](double p) {
        const double ent = p > 0.0 ? eps * p * (std::log(p) - 1.0) : 0.0;
        return c * p + ent + tau * (p - a) * (p - a) + tau * std::fabs(p - 1.0);
    };
    double lo = 0.0, hi = a + 2.0;
    for (int it = 0; it < 400; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (f(m1) < f(m2)) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    const double p = 0.5 * (lo + hi);
    if (argmin) *argmin = p;
    return std::min(f(p), f(0.0));
}

struct Metrics {
    double mae = 0, rmse = 0, nae = 0, sre = 0;
};

// Accumulates back to front, one term per metric per record.
inline Metrics one_pass_metrics(const std::vector<countforge::CountRecord>& records) {
    long double abs = 0, sq = 0, rel = 0, rel_sq = 0;
    for (auto it = records.rbegin(); it != records.rend(); ++it) {
        const long double d = static_cast<long double>(it->pred) - it->gt;
        abs += std::fabs(d);
        sq += d * d;
        rel += std::fabs(d) / it->gt;
        rel_sq += d * d / it->gt;
    }
    const long double L = static_cast<long double>(records.size());
    return {static_cast<double>(abs / L), static_cast<double>(std::sqrt(sq / L)),
            static_cast<double>(rel / L), static_cast<double>(std::sqrt(rel_sq / L))};
}

// Points of `image` strictly inside the crop, counted without touching the
// library's cropping code.
inline std::size_t points_in_crop(const countforge::AnnotatedImage& image, const countforge::CropRect& r) {
    std::size_t n = 0;
    for (const auto& p : image.points.points) {
        if (p.x > r.x && p.x < r.x + r.w && p.y > r.y && p.y < r.y + r.h) ++n;
    }
    return n;
}

}  // namespace oracle
