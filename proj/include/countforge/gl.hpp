#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "countforge/core.hpp"
#include "countforge/transport.hpp"

namespace countforge {

inline constexpr double kDefaultEpsilon = 0.01;
inline constexpr double kDefaultTau = 0.5;

struct GlConfig {
    double epsilon = kDefaultEpsilon;  ///< entropic weight
    double tau = kDefaultTau;          ///< marginal penalty weight
    double eta = kDefaultEta;          ///< cost bandwidth, used when building the cost
    int max_iters = 20000;
    double tol = 1e-7;  ///< relative objective change

    void validate() const;
};

struct TransportPlan {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t j) const { return values[i * m + j]; }
    std::vector<double> row_sums() const;
    std::vector<double> col_sums() const;
};

struct GlResult {
    double loss = 0.0;
    TransportPlan plan;
    std::vector<double> grad_a;
    int iterations = 0;
    bool converged = false;
    /// Primal objective minus the dual bound at the final iterate; zero for
    /// the closed-form m = 0 case.
    double duality_gap = 0.0;
};

/// Dual potentials of the scaling solver. Passing the same object to
/// successive calls on a slowly changing density warm-starts the solve.
struct GlPotentials {
    std::vector<double> row;
    std::vector<double> col;
};

/// Unbalanced entropic transport loss
///
///   min_P <C,P> + eps * sum P (log P - 1) + tau |P 1 - a|^2 + tau |P^T 1 - 1|_1
///
/// between the predicted density `a` (n cells) and m unit-mass annotation
/// points. The returned gradient is the envelope derivative
/// d loss / d a = -2 tau (P 1 - a) at the returned plan.
///
/// Throws InvalidInput on dimension mismatch or bad config and
/// NumericalError on non-finite input.
GlResult gl_loss(std::span<const double> a, const CostMatrix& cost, std::size_t m,
                 const GlConfig& config = {}, GlPotentials* warm = nullptr);
GlResult gl_loss(const DensityGrid& a, const CostMatrix& cost, std::size_t m,
                 const GlConfig& config = {}, GlPotentials* warm = nullptr);

/// Objective above evaluated at an arbitrary nonnegative plan.
double gl_objective(std::span<const double> a, const CostMatrix& cost, const TransportPlan& plan,
                    const GlConfig& config);

/// Independent reference minimizer of the same objective: damped Newton
/// descent on the dense plan in log parameterization, with the column
/// absolute value smoothed and the smoothing driven to zero. Only for tiny
/// instances (n * m <= 64).
double brute_force_gl(std::span<const double> a, const CostMatrix& cost, std::size_t m,
                      const GlConfig& config = {});

/// Central finite differences of gl_loss with respect to each a_i.
std::vector<double> finite_diff_grad(std::span<const double> a, const CostMatrix& cost,
                                     std::size_t m, const GlConfig& config = {}, double h = 1e-5);

struct L2Result {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Pixel-wise squared error sum_i (a_i - y_i)^2 and its gradient.
L2Result l2_loss(std::span<const double> a, std::span<const double> y);
L2Result l2_loss(const DensityGrid& a, const DensityGrid& y);

}  // namespace countforge
