// Reference minimizer for the generalized loss. It works on the primal plan
// directly and shares no code with the dual scaling solver in gl.cpp.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "countforge/errors.hpp"
#include "countforge/gl.hpp"

namespace countforge {

namespace {

constexpr std::size_t kMaxOracleVariables = 64;
constexpr double kThetaFloor = -700.0;

struct Smoothed {
    std::span<const double> a;
    const CostMatrix& cost;
    double eps;
    double tau;
    double delta;

    std::size_t n() const { return cost.n; }
    std::size_t m() const { return cost.m; }

    double value(const Eigen::VectorXd& theta) const {
        const std::size_t nn = n(), mm = m();
        double v = 0.0;
        Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nn));
        Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mm));
        for (std::size_t i = 0; i < nn; ++i) {
            for (std::size_t j = 0; j < mm; ++j) {
                const auto k = static_cast<Eigen::Index>(i * mm + j);
                const double p = std::exp(theta[k]);
                v += p * (cost(i, j) + eps * (theta[k] - 1.0));
                r[static_cast<Eigen::Index>(i)] += p;
                s[static_cast<Eigen::Index>(j)] += p;
            }
        }
        for (std::size_t i = 0; i < nn; ++i) {
            const double d = r[static_cast<Eigen::Index>(i)] - a[i];
            v += tau * d * d;
        }
        for (std::size_t j = 0; j < mm; ++j) {
            const double d = s[static_cast<Eigen::Index>(j)] - 1.0;
            v += tau * std::sqrt(d * d + delta * delta);
        }
        return v;
    }

    // Gradient and a positive definite modification of the Hessian, both
    // with respect to theta = log P.
    void derivatives(const Eigen::VectorXd& theta, Eigen::VectorXd& grad,
                     Eigen::MatrixXd& hess) const {
        const std::size_t nn = n(), mm = m();
        const auto nv = static_cast<Eigen::Index>(nn * mm);
        Eigen::VectorXd p = theta.array().exp();
        Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nn));
        Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mm));
        for (std::size_t i = 0; i < nn; ++i) {
            for (std::size_t j = 0; j < mm; ++j) {
                const auto k = static_cast<Eigen::Index>(i * mm + j);
                r[static_cast<Eigen::Index>(i)] += p[k];
                s[static_cast<Eigen::Index>(j)] += p[k];
            }
        }
        Eigen::VectorXd col_slope(static_cast<Eigen::Index>(mm));
        Eigen::VectorXd col_curv(static_cast<Eigen::Index>(mm));
        for (std::size_t j = 0; j < mm; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double d = s[jj] - 1.0;
            const double q = std::sqrt(d * d + delta * delta);
            col_slope[jj] = tau * d / q;
            col_curv[jj] = tau * delta * delta / (q * q * q);
        }

        grad.resize(nv);
        hess.setZero(nv, nv);
        for (std::size_t i = 0; i < nn; ++i) {
            for (std::size_t j = 0; j < mm; ++j) {
                const auto k = static_cast<Eigen::Index>(i * mm + j);
                const double dp = cost(i, j) + eps * theta[k] +
                                  2.0 * tau * (r[static_cast<Eigen::Index>(i)] - a[i]) +
                                  col_slope[static_cast<Eigen::Index>(j)];
                grad[k] = p[k] * dp;
                hess(k, k) += eps * p[k] + std::abs(p[k] * dp);
            }
        }
        for (std::size_t i = 0; i < nn; ++i) {
            for (std::size_t j1 = 0; j1 < mm; ++j1) {
                const auto k1 = static_cast<Eigen::Index>(i * mm + j1);
                for (std::size_t j2 = 0; j2 < mm; ++j2) {
                    const auto k2 = static_cast<Eigen::Index>(i * mm + j2);
                    hess(k1, k2) += 2.0 * tau * p[k1] * p[k2];
                }
            }
        }
        for (std::size_t j = 0; j < mm; ++j) {
            const double h = col_curv[static_cast<Eigen::Index>(j)];
            for (std::size_t i1 = 0; i1 < nn; ++i1) {
                const auto k1 = static_cast<Eigen::Index>(i1 * mm + j);
                for (std::size_t i2 = 0; i2 < nn; ++i2) {
                    const auto k2 = static_cast<Eigen::Index>(i2 * mm + j);
                    hess(k1, k2) += h * p[k1] * p[k2];
                }
            }
        }
    }
};

void newton_minimize(const Smoothed& f, Eigen::VectorXd& theta) {
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    double value = f.value(theta);
    for (int it = 0; it < 3000; ++it) {
        f.derivatives(theta, grad, hess);

        // Jacobi scaling keeps the factorization well posed when some plan
        // entries are many orders of magnitude below the others.
        Eigen::VectorXd scale = hess.diagonal().array().max(1e-300).rsqrt();
        Eigen::MatrixXd scaled = scale.asDiagonal() * hess * scale.asDiagonal();
        Eigen::VectorXd step =
            -(scale.asDiagonal() * scaled.ldlt().solve(scale.asDiagonal() * grad));
        const double max_step = step.cwiseAbs().maxCoeff();
        if (max_step > 20.0) step *= 20.0 / max_step;

        const double slope = grad.dot(step);
        if (!(slope < 0.0) || -slope < 1e-22) break;

        double t = 1.0;
        Eigen::VectorXd trial;
        double trial_value = value;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            trial = (theta + t * step).cwiseMax(kThetaFloor);
            trial_value = f.value(trial);
            if (trial_value <= value + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        const double decrease = value - trial_value;
        theta = trial;
        value = trial_value;
        if (decrease <= 1e-16 * std::max(1.0, std::abs(value)) && t == 1.0) break;
    }
}

}  // namespace

double brute_force_gl(std::span<const double> a, const CostMatrix& cost, std::size_t m,
                      const GlConfig& config) {
    config.validate();
    if (cost.n != a.size() || cost.m != m || cost.values.size() != cost.n * cost.m) {
        throw InvalidInput("oracle: cost, density and point count disagree");
    }
    if (cost.n * m > kMaxOracleVariables) {
        throw InvalidInput("oracle instance too large: n*m = " + std::to_string(cost.n * m) +
                           " exceeds " + std::to_string(kMaxOracleVariables));
    }
    if (m == 0) {
        double v = 0.0;
        for (double x : a) v += config.tau * x * x;
        return v;
    }

    const auto nv = static_cast<Eigen::Index>(cost.n * m);
    Eigen::VectorXd theta = Eigen::VectorXd::Constant(nv, std::log(0.5 / static_cast<double>(m)));
    for (double delta : {1e-2, 1e-4, 1e-6, 1e-8, 1e-10}) {
        Smoothed f{a, cost, config.epsilon, config.tau, delta};
        newton_minimize(f, theta);
    }

    TransportPlan plan;
    plan.n = cost.n;
    plan.m = m;
    plan.values.resize(cost.n * m);
    for (Eigen::Index k = 0; k < nv; ++k) {
        plan.values[static_cast<std::size_t>(k)] = std::exp(theta[k]);
    }
    double best = gl_objective(a, cost, plan, config);

    // Boundary check: entries driven toward zero may do better exactly at zero.
    for (double& p : plan.values) {
        if (p < 1e-20) p = 0.0;
    }
    best = std::min(best, gl_objective(a, cost, plan, config));
    return best;
}

}  // namespace countforge
