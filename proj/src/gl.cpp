#include "countforge/gl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "countforge/errors.hpp"

namespace countforge {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_inputs(std::span<const double> a, const CostMatrix& cost, std::size_t m) {
    if (cost.n != a.size()) {
        throw InvalidInput("cost has " + std::to_string(cost.n) + " rows but density has " +
                           std::to_string(a.size()) + " cells");
    }
    if (cost.m != m) {
        throw InvalidInput("cost has " + std::to_string(cost.m) + " columns but " +
                           std::to_string(m) + " points were given");
    }
    if (cost.values.size() != cost.n * cost.m) {
        throw InvalidInput("cost matrix storage does not match its dimensions");
    }
    for (double v : a) {
        if (!std::isfinite(v)) throw NumericalError("density contains a non-finite value");
    }
    for (double c : cost.values) {
        if (!std::isfinite(c)) throw NumericalError("cost contains a non-finite value");
    }
}

// Solves e^u + u = x for u. The left side is convex and increasing, and both
// starting points sit right of the root, so Newton descends monotonically.
double solve_exp_plus_identity(double x) {
    double u = x <= 1.0 ? x : std::log(x);
    for (int k = 0; k < 100; ++k) {
        const double eu = std::exp(u);
        const double step = (eu + u - x) / (eu + 1.0);
        u -= step;
        if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(u))) break;
    }
    return u;
}

// Generalized loss dual reduced to the column potentials g. For fixed g the
// row potentials are available in closed form, so
//
//   Phi(g) = max_f sum_i (f_i a_i - f_i^2 / 4 tau) + sum_j g_j
//            - eps sum_ij exp((f_i + g_j - C_ij) / eps),    |g_j| <= tau,
//
// is a smooth concave function on a box. Its gradient is 1 - s(g), where s
// are the column sums of the induced plan, and its Hessian is
// -(1/eps) (diag(s) - sum_i w_i p_i p_i^T) with w_i = 2 tau / (eps + 2 tau r_i).
class ColumnDual {
public:
    ColumnDual(std::span<const double> a, const CostMatrix& cost, const GlConfig& config)
        : a_(a),
          cost_(cost),
          eps_(config.epsilon),
          tau_(config.tau),
          n_(cost.n),
          m_(cost.m),
          log_scale_(std::log(2.0 * config.tau / config.epsilon)),
          f_(n_),
          r_(n_),
          s_(m_),
          logp_(n_ * m_) {}

    void evaluate(const std::vector<double>& g) {
        std::fill(s_.begin(), s_.end(), 0.0);
        double dual = 0.0;
        double transport = 0.0;
        double row_pen = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double* c = cost_.values.data() + i * m_;
            double mx = kNegInf;
            for (std::size_t j = 0; j < m_; ++j) mx = std::max(mx, (g[j] - c[j]) / eps_);
            double acc = 0.0;
            for (std::size_t j = 0; j < m_; ++j) acc += std::exp((g[j] - c[j]) / eps_ - mx);
            // Row optimality: r = a - f / (2 tau) and log r = f / eps + lse,
            // i.e. e^u + u = x with r = (eps / 2 tau) e^u.
            const double lse = mx + std::log(acc);
            const double u = solve_exp_plus_identity(log_scale_ + 2.0 * tau_ * a_[i] / eps_ + lse);
            const double fi = 2.0 * tau_ * (a_[i] - eps_ / (2.0 * tau_) * std::exp(u));
            f_[i] = fi;

            double ri = 0.0;
            for (std::size_t j = 0; j < m_; ++j) {
                const double lp = (fi + g[j] - c[j]) / eps_;
                logp_[i * m_ + j] = lp;
                const double p = std::exp(lp);
                ri += p;
                s_[j] += p;
                transport += p * (fi + g[j] - eps_);
            }
            r_[i] = ri;
            row_pen += tau_ * (ri - a_[i]) * (ri - a_[i]);
            dual += fi * a_[i] - fi * fi / (4.0 * tau_) - eps_ * ri;
        }
        double col_pen = 0.0;
        for (std::size_t j = 0; j < m_; ++j) {
            dual += g[j];
            col_pen += tau_ * std::abs(s_[j] - 1.0);
        }
        dual_ = dual;
        primal_ = transport + row_pen + col_pen;
    }

    // One projected Newton iteration on -Phi over the box [-tau, tau]^m.
    // Returns false when no step makes progress.
    bool newton_step(std::vector<double>& g) {
        std::vector<double> grad(m_);
        double proj_norm = 0.0;
        for (std::size_t j = 0; j < m_; ++j) {
            grad[j] = s_[j] - 1.0;
            const double moved = std::clamp(g[j] - grad[j], -tau_, tau_) - g[j];
            proj_norm += moved * moved;
        }
        proj_norm = std::sqrt(proj_norm);
        if (proj_norm == 0.0) return false;

        // Variables at (or within the projected-gradient distance of) a bound
        // with the gradient pointing outward are held on a scaled gradient
        // step; the rest get a Newton step.
        const double band = std::min(1e-6, proj_norm);
        std::vector<char> free(m_, 1);
        std::vector<double> diag = hessian_diagonal();
        std::vector<double> dir(m_, 0.0);
        for (std::size_t j = 0; j < m_; ++j) {
            const bool at_upper = g[j] >= tau_ - band && grad[j] < 0.0;
            const bool at_lower = g[j] <= -tau_ + band && grad[j] > 0.0;
            if (at_upper || at_lower) {
                free[j] = 0;
                dir[j] = -grad[j] / std::max(diag[j], 1e-300);
            }
        }
        solve_free(free, diag, grad, dir);

        double slope_ref = 0.0;
        const double psi = -dual_;
        const std::vector<double> g0 = g;
        std::vector<double> trial(m_);
        for (double t = 1.0; t > 1e-20; t *= 0.5) {
            double slope = 0.0;
            double change = 0.0;
            for (std::size_t j = 0; j < m_; ++j) {
                trial[j] = std::clamp(g0[j] + t * dir[j], -tau_, tau_);
                slope += grad[j] * (trial[j] - g0[j]);
                change = std::max(change, std::abs(trial[j] - g0[j]));
            }
            if (change == 0.0) break;
            slope_ref = slope;
            evaluate(trial);
            if (-dual_ <= psi + 1e-4 * slope_ref) {
                g = trial;
                return true;
            }
        }
        evaluate(g0);
        return false;
    }

    double primal() const { return primal_; }
    double gap() const { return primal_ - dual_; }
    std::vector<double> plan() const {
        std::vector<double> p(logp_.size());
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(logp_[k]);
        return p;
    }
    const std::vector<double>& row_potentials() const { return f_; }

private:
    double weight(std::size_t i) const { return 2.0 * tau_ / (eps_ + 2.0 * tau_ * r_[i]); }

    std::vector<double> hessian_diagonal() const {
        std::vector<double> d(s_);
        for (std::size_t i = 0; i < n_; ++i) {
            const double w = weight(i);
            for (std::size_t j = 0; j < m_; ++j) {
                const double p = std::exp(logp_[i * m_ + j]);
                d[j] -= w * p * p;
            }
        }
        for (double& v : d) v = std::max(v, 0.0) / eps_;
        return d;
    }

    // Hessian of -Phi restricted to the free set, applied to v.
    void hessian_times(const std::vector<char>& free, const std::vector<double>& v,
                       std::vector<double>& out) const {
        for (std::size_t j = 0; j < m_; ++j) out[j] = free[j] ? s_[j] * v[j] : 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double* lp = logp_.data() + i * m_;
            double dot = 0.0;
            for (std::size_t j = 0; j < m_; ++j) {
                if (free[j]) dot += std::exp(lp[j]) * v[j];
            }
            if (dot == 0.0) continue;
            const double wd = weight(i) * dot;
            for (std::size_t j = 0; j < m_; ++j) {
                if (free[j]) out[j] -= wd * std::exp(lp[j]);
            }
        }
        for (std::size_t j = 0; j < m_; ++j) out[j] = out[j] / eps_ + ridge_ * v[j];
    }

    // Preconditioned conjugate gradients for H_FF d_F = -grad_F.
    void solve_free(const std::vector<char>& free, const std::vector<double>& diag,
                    const std::vector<double>& grad, std::vector<double>& dir) {
        double max_diag = 0.0;
        std::size_t n_free = 0;
        for (std::size_t j = 0; j < m_; ++j) {
            if (free[j]) {
                max_diag = std::max(max_diag, diag[j]);
                ++n_free;
            }
        }
        if (n_free == 0) return;
        ridge_ = 1e-12 * std::max(max_diag, 1.0);

        std::vector<double> x(m_, 0.0), res(m_, 0.0), z(m_, 0.0), p(m_, 0.0), hp(m_, 0.0);
        double rhs_norm = 0.0;
        for (std::size_t j = 0; j < m_; ++j) {
            if (!free[j]) continue;
            res[j] = -grad[j];
            rhs_norm += res[j] * res[j];
        }
        rhs_norm = std::sqrt(rhs_norm);
        const auto precond = [&](std::size_t j) { return 1.0 / (diag[j] + ridge_); };
        double rz = 0.0;
        for (std::size_t j = 0; j < m_; ++j) {
            if (!free[j]) continue;
            z[j] = precond(j) * res[j];
            p[j] = z[j];
            rz += res[j] * z[j];
        }
        const std::size_t max_cg = 2 * n_free + 20;
        for (std::size_t k = 0; k < max_cg; ++k) {
            hessian_times(free, p, hp);
            double php = 0.0;
            for (std::size_t j = 0; j < m_; ++j) php += p[j] * hp[j];
            if (!(php > 0.0)) break;
            const double alpha = rz / php;
            double res_norm = 0.0;
            for (std::size_t j = 0; j < m_; ++j) {
                if (!free[j]) continue;
                x[j] += alpha * p[j];
                res[j] -= alpha * hp[j];
                res_norm += res[j] * res[j];
            }
            if (std::sqrt(res_norm) <= 1e-13 * rhs_norm) break;
            double rz_next = 0.0;
            for (std::size_t j = 0; j < m_; ++j) {
                if (!free[j]) continue;
                z[j] = precond(j) * res[j];
                rz_next += res[j] * z[j];
            }
            const double beta = rz_next / rz;
            rz = rz_next;
            for (std::size_t j = 0; j < m_; ++j) {
                if (free[j]) p[j] = z[j] + beta * p[j];
            }
        }
        for (std::size_t j = 0; j < m_; ++j) {
            if (free[j]) dir[j] = x[j];
        }
    }

    std::span<const double> a_;
    const CostMatrix& cost_;
    double eps_;
    double tau_;
    std::size_t n_;
    std::size_t m_;
    double log_scale_;
    std::vector<double> f_;
    std::vector<double> r_;
    std::vector<double> s_;
    std::vector<double> logp_;
    double dual_ = 0.0;
    double primal_ = 0.0;
    double ridge_ = 0.0;
};

}  // namespace

void GlConfig::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidInput("epsilon must be > 0");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidInput("tau must be > 0");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidInput("eta must be > 0");
    if (max_iters < 1) throw InvalidInput("max_iters must be >= 1");
    if (!(tol > 0.0) || !std::isfinite(tol)) throw InvalidInput("tol must be > 0");
}

std::vector<double> TransportPlan::row_sums() const {
    std::vector<double> r(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) r[i] += values[i * m + j];
    }
    return r;
}

std::vector<double> TransportPlan::col_sums() const {
    std::vector<double> s(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) s[j] += values[i * m + j];
    }
    return s;
}

double gl_objective(std::span<const double> a, const CostMatrix& cost, const TransportPlan& plan,
                    const GlConfig& config) {
    if (plan.n != cost.n || plan.m != cost.m || a.size() != cost.n) {
        throw InvalidInput("plan, cost and density dimensions disagree");
    }
    double obj = 0.0;
    for (std::size_t k = 0; k < plan.values.size(); ++k) {
        const double p = plan.values[k];
        if (p < 0.0) throw InvalidInput("plan entries must be nonnegative");
        if (p > 0.0) obj += p * (cost.values[k] + config.epsilon * (std::log(p) - 1.0));
    }
    const auto r = plan.row_sums();
    const auto s = plan.col_sums();
    for (std::size_t i = 0; i < plan.n; ++i) obj += config.tau * (r[i] - a[i]) * (r[i] - a[i]);
    for (std::size_t j = 0; j < plan.m; ++j) obj += config.tau * std::abs(s[j] - 1.0);
    return obj;
}

GlResult gl_loss(std::span<const double> a, const CostMatrix& cost, std::size_t m,
                 const GlConfig& config, GlPotentials* warm) {
    config.validate();
    check_inputs(a, cost, m);
    const std::size_t n = a.size();
    const double tau = config.tau;

    GlResult result;
    result.plan.n = n;
    result.plan.m = m;
    result.grad_a.resize(n);

    if (m == 0) {
        for (std::size_t i = 0; i < n; ++i) {
            result.loss += tau * a[i] * a[i];
            result.grad_a[i] = 2.0 * tau * a[i];
        }
        result.converged = true;
        return result;
    }

    ColumnDual dual(a, cost, config);
    std::vector<double> g(m, 0.0);
    if (warm != nullptr && warm->col.size() == m) {
        for (std::size_t j = 0; j < m; ++j) g[j] = std::clamp(warm->col[j], -tau, tau);
    }

    dual.evaluate(g);
    double prev_obj = std::numeric_limits<double>::infinity();
    int iter = 0;
    bool converged = false;
    while (iter < config.max_iters) {
        ++iter;
        if (!dual.newton_step(g)) {
            // No further progress is representable; accept if the certificate holds.
            converged = dual.gap() <= config.tol * std::max(1.0, std::abs(dual.primal()));
            break;
        }
        const double obj = dual.primal();
        if (!std::isfinite(obj)) {
            throw NumericalError("generalized loss solver produced a non-finite objective");
        }
        const double scale = std::max(1.0, std::abs(obj));
        if (std::abs(prev_obj - obj) < config.tol * scale && dual.gap() <= config.tol * scale) {
            converged = true;
            break;
        }
        prev_obj = obj;
    }

    result.loss = dual.primal();
    result.iterations = iter;
    result.converged = converged;
    result.duality_gap = dual.gap();
    result.plan.values = dual.plan();
    const auto r = result.plan.row_sums();
    for (std::size_t i = 0; i < n; ++i) result.grad_a[i] = -2.0 * tau * (r[i] - a[i]);

    if (warm != nullptr) {
        warm->row = dual.row_potentials();
        warm->col = g;
    }
    return result;
}

GlResult gl_loss(const DensityGrid& a, const CostMatrix& cost, std::size_t m,
                 const GlConfig& config, GlPotentials* warm) {
    return gl_loss(a.values(), cost, m, config, warm);
}

std::vector<double> finite_diff_grad(std::span<const double> a, const CostMatrix& cost,
                                     std::size_t m, const GlConfig& config, double h) {
    if (!(h > 0.0)) throw InvalidInput("finite difference step must be positive");
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double up = gl_loss(x, cost, m, config).loss;
        x[i] = orig - h;
        const double down = gl_loss(x, cost, m, config).loss;
        x[i] = orig;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

L2Result l2_loss(std::span<const double> a, std::span<const double> y) {
    if (a.size() != y.size()) {
        throw InvalidInput("l2 loss operands differ in size: " + std::to_string(a.size()) +
                           " vs " + std::to_string(y.size()));
    }
    L2Result out;
    out.grad.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - y[i];
        out.loss += d * d;
        out.grad[i] = 2.0 * d;
    }
    return out;
}

L2Result l2_loss(const DensityGrid& a, const DensityGrid& y) {
    if (a.height() != y.height() || a.width() != y.width()) {
        throw InvalidInput("l2 loss operands have different grid dimensions");
    }
    return l2_loss(a.values(), y.values());
}

}  // namespace countforge
