// SPDX-License-Identifier: Apache-2.0
//
// Projected gradient descent over the stacked MA positions with backtracking
// (Armijo) line search, for the ZF total-power objective, the MMSE
// power-balance objective and single-user channel-power ascent.
#pragma once

#include "mamac/channel.hpp"
#include "mamac/combining.hpp"
#include "mamac/types.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mamac {

struct DescentConfig {
    int t_max = 200;
    double tau0 = 10.0;
    double kappa = 0.5;
    double xi = 0.6;
    double epsilon = 1e-6;   // W
    double fd_delta = 1e-7;  // m; wavelength * 1e-5 at 1 cm
    int i_max = 60;
    double inner_tol = 1e-6; // MMSE power fixed point, W
    int inner_max_iter = 500;

    static DescentConfig for_wavelength(double wavelength) {
        DescentConfig c;
        c.fd_delta = wavelength * 1e-5;
        return c;
    }

    void validate() const {
        if (t_max < 0) throw std::invalid_argument("DescentConfig: t_max must be >= 0");
        if (!(tau0 > 0.0)) throw std::invalid_argument("DescentConfig: tau0 must be positive");
        if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("DescentConfig: kappa must lie in (0, 1)");
        if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("DescentConfig: xi must lie in (0, 1)");
        if (!(epsilon > 0.0)) throw std::invalid_argument("DescentConfig: epsilon must be positive");
        if (!(fd_delta > 0.0)) throw std::invalid_argument("DescentConfig: fd_delta must be positive");
        if (i_max < 0) throw std::invalid_argument("DescentConfig: i_max must be >= 0");
    }
};

// Stacked positions [u_1; ...; u_K] with per-coordinate box bounds.
struct PositionVector {
    RVector coords;
    RVector lower;
    RVector upper;

    Eigen::Index size() const { return coords.size(); }

    bool in_bounds() const {
        return (coords.array() >= lower.array()).all() && (coords.array() <= upper.array()).all();
    }

    PositionVector with_coords(RVector c) const { return {std::move(c), lower, upper}; }
};

inline PositionVector project_box(const PositionVector& x) {
    return x.with_coords(x.coords.cwiseMax(x.lower).cwiseMin(x.upper));
}

// All antennas at their local origins, bounded by each user's region.
inline PositionVector origin_positions(const Scenario& s) {
    const Eigen::Index n = 3 * s.user_count();
    PositionVector x{RVector::Zero(n), RVector(n), RVector(n)};
    for (int k = 0; k < s.user_count(); ++k) {
        x.lower.segment<3>(3 * k) = s.users[static_cast<std::size_t>(k)].region().lower;
        x.upper.segment<3>(3 * k) = s.users[static_cast<std::size_t>(k)].region().upper;
    }
    return x;
}

// Forward differences (f(x + delta e_i) - f(x)) / delta. A component whose
// forward probe is infinite falls back to a backward difference; when both
// probes are infinite the component is zero.
template <class Objective>
RVector finite_diff_gradient(Objective&& f, const RVector& x, double fx, double delta) {
    RVector grad(x.size());
    RVector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe(i) = x(i) + delta;
        const double fp = f(probe);
        if (std::isfinite(fp)) {
            grad(i) = (fp - fx) / delta;
        } else {
            probe(i) = x(i) - delta;
            const double fm = f(probe);
            grad(i) = std::isfinite(fm) ? (fx - fm) / delta : 0.0;
        }
        probe(i) = x(i);
    }
    return grad;
}

template <class Objective>
RVector finite_diff_gradient(Objective&& f, const RVector& x, double delta) {
    return finite_diff_gradient(f, x, f(x), delta);
}

struct LineSearchResult {
    PositionVector position;
    double step = 0.0;
    double value = 0.0;
    bool accepted = false;
    int shrinks = 0;
};

struct AlwaysFeasible {
    bool operator()(const PositionVector&) const { return true; }
};

// Backtracking from tau0: candidate = project(x - tau * grad), shrinking tau by
// kappa until f(candidate) <= fx - xi * tau * ||grad||^2 and extra_ok holds.
// After i_max shrinks the step is rejected and x is returned unchanged.
template <class Objective, class Guard = AlwaysFeasible>
LineSearchResult backtrack_step(Objective&& f, const PositionVector& x, double fx, const RVector& grad,
                                const DescentConfig& cfg, Guard&& extra_ok = {}) {
    const double g2 = grad.squaredNorm();
    double tau = cfg.tau0;
    for (int i = 0; i <= cfg.i_max; ++i) {
        PositionVector cand = project_box(x.with_coords(x.coords - tau * grad));
        const double fc = f(cand.coords);
        if (fc <= fx - cfg.xi * tau * g2 && extra_ok(cand)) {
            return {std::move(cand), tau, fc, true, i};
        }
        tau *= cfg.kappa;
    }
    return {x, 0.0, fx, false, cfg.i_max};
}

template <class Objective, class Guard = AlwaysFeasible>
LineSearchResult backtrack_step(Objective&& f, const PositionVector& x, const RVector& grad,
                                const DescentConfig& cfg, Guard&& extra_ok = {}) {
    return backtrack_step(f, x, f(x.coords), grad, cfg, std::forward<Guard>(extra_ok));
}

// Mean normalized signal and interference power over users at one iterate.
struct IterationPowers {
    double signal = 0.0;
    double interference = 0.0;
};

struct OptimizeResult {
    PositionVector positions;
    CMatrix combiner;
    RVector powers;
    double total_power = 0.0;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
    // MMSE only: powers weighting the covariance of `combiner`.
    RVector combiner_powers;
    // MMSE only: one entry per trace entry.
    std::vector<IterationPowers> diagnostics;
};

namespace detail {

inline IterationPowers mean_powers(const CMatrix& w, const CMatrix& h, const RVector& p, double sigma2) {
    const NormalizedPowers np = normalized_powers(w, h, p, sigma2);
    return {np.signal.mean(), np.interference.mean()};
}

} // namespace detail

// Minimizes the ZF total power g(u) = tr{(H^H H)^-1 Omega} from u = 0.
inline OptimizeResult optimize_zf(const Scenario& s, const DescentConfig& cfg) {
    cfg.validate();
    const RVector eta = s.eta();
    const double sigma2 = s.noise_power;
    auto objective = [&](const RVector& u) {
        return zf_total_power_unchecked(channel_matrix(s, u), eta, sigma2);
    };

    OptimizeResult r;
    PositionVector x = origin_positions(s);
    double fx = zf_total_power(channel_matrix(s, x.coords), eta, sigma2);
    r.trace.push_back(fx);

    for (int t = 1; t <= cfg.t_max; ++t) {
        const RVector grad = finite_diff_gradient(objective, x.coords, fx, cfg.fd_delta);
        LineSearchResult ls = backtrack_step(objective, x, fx, grad, cfg);
        if (!ls.accepted) {
            r.converged = true;
            break;
        }
        const double decrease = fx - ls.value;
        x = std::move(ls.position);
        fx = ls.value;
        r.trace.push_back(fx);
        r.iterations = t;
        if (std::abs(decrease) < cfg.epsilon) {
            r.converged = true;
            break;
        }
    }

    const CMatrix h = channel_matrix(s, x.coords);
    r.combiner = zf_combiner(h);
    r.powers = zf_powers(h, eta, sigma2).powers;
    r.total_power = fx;
    r.positions = std::move(x);
    return r;
}

// Alternates projected gradient steps on f(u, P) = ||(D - Psi)^-1 b||_1 at
// fixed P with the update P <- diag(p_hat). Trace entry t is the total power
// sum(p_hat^(t)) that the MMSE combiner built from P^(t-1) needs at u^(t);
// that pair meets every SINR target exactly.
inline OptimizeResult optimize_mmse(const Scenario& s, const DescentConfig& cfg) {
    cfg.validate();
    const RVector eta = s.eta();
    const double sigma2 = s.noise_power;

    PositionVector x = origin_positions(s);
    CMatrix h = channel_matrix(s, x.coords);
    require_full_column_rank(h);
    FixedPointResult init = min_power_fixed_point(h, eta, sigma2, cfg.inner_tol, cfg.inner_max_iter);
    if (!init.solution.power.feasible) {
        throw InfeasibleError("optimize_mmse: infeasible power balance at the initial positions");
    }

    OptimizeResult r;
    CMatrix w = init.solution.combiner;
    RVector p = init.solution.power.powers;      // P^(t-1) after the loop body
    RVector weights = init.combiner_powers;      // powers behind w
    double total = init.solution.power.total;
    r.trace.push_back(total);
    r.diagnostics.push_back(detail::mean_powers(w, h, p, sigma2));

    for (int t = 1; t <= cfg.t_max; ++t) {
        const RVector fixed_p = p;
        auto coefficients = [&](const RVector& u) {
            return mmse_coefficients(channel_matrix(s, u), fixed_p, sigma2);
        };
        auto objective = [&](const RVector& u) {
            const MmseCoefficients c = coefficients(u);
            return solve_power_balance(c.gains, c.noise, eta).total;
        };
        auto feasible = [&](const PositionVector& cand) {
            return power_feasible(coefficients(cand.coords).gains, eta);
        };

        const double fx = objective(x.coords);
        if (!std::isfinite(fx)) break;
        const RVector grad = finite_diff_gradient(objective, x.coords, fx, cfg.fd_delta);
        LineSearchResult ls = backtrack_step(objective, x, fx, grad, cfg, feasible);
        if (!ls.accepted) {
            r.converged = true;
            break;
        }
        if (ls.value > total) {
            // Only reachable through rounding once the power update has stalled.
            r.converged = true;
            break;
        }
        const CMatrix h_next = channel_matrix(s, ls.position.coords);
        const CMatrix w_next = mmse_combiner(h_next, fixed_p, sigma2);
        const MmseCoefficients c = coefficients_for(w_next, h_next, sigma2);
        PowerSolution next = solve_power_balance(c.gains, c.noise, eta);
        if (!next.feasible) break;

        const double decrease = total - next.total;
        x = std::move(ls.position);
        h = h_next;
        w = w_next;
        weights = fixed_p;
        p = next.powers;
        total = next.total;
        r.trace.push_back(total);
        r.diagnostics.push_back(detail::mean_powers(w, h, p, sigma2));
        r.iterations = t;
        if (std::abs(decrease) < cfg.epsilon) {
            r.converged = true;
            break;
        }
    }

    r.positions = std::move(x);
    r.combiner = std::move(w);
    r.powers = std::move(p);
    r.combiner_powers = std::move(weights);
    r.total_power = total;
    return r;
}

// Gradient of ||h(pos)||^2 = g^H Q g with respect to pos:
//   d/dx = (2 pi / lambda) sum_m sum_n (vtheta_m - vtheta_n) |q_mn|
//          sin((2 pi / lambda)(rho_n - rho_m) + arg q_mn)
// and likewise for y (vphi) and z (vomega).
inline Vec3 channel_power_gradient(const UserChannel& u, const CMatrix& q, const Vec3& pos) {
    const double k = kTwoPi / u.wavelength();
    const auto& dirs = u.tx_directions();
    const RVector rho = dirs * pos;
    Vec3 grad = Vec3::Zero();
    for (Eigen::Index m = 0; m < q.rows(); ++m) {
        for (Eigen::Index n = 0; n < q.cols(); ++n) {
            if (m == n) continue;
            const double s = std::abs(q(m, n)) * std::sin(k * (rho(n) - rho(m)) + std::arg(q(m, n)));
            grad += s * (dirs.row(m) - dirs.row(n)).transpose();
        }
    }
    return k * grad;
}

inline Vec3 channel_power_gradient(const UserChannel& u, const Vec3& pos) {
    return channel_power_gradient(u, channel_power_quadratic(u), pos);
}

struct ChannelPowerMaximum {
    Vec3 position = Vec3::Zero();
    double power = 0.0;
    int iterations = 0;
};

// Projected gradient ascent of ||h(pos)||^2 from the origin. The objective is
// scaled by 1 / tr(Q), the position-averaged channel power, so the step
// parameters do not depend on the path loss.
inline ChannelPowerMaximum maximize_channel_power(const UserChannel& u, const DescentConfig& cfg) {
    cfg.validate();
    const CMatrix q = channel_power_quadratic(u);
    const double scale = q.trace().real();
    ChannelPowerMaximum out;
    out.power = channel_vector(u, Vec3::Zero()).squaredNorm();
    if (!(scale > 0.0)) return out;

    auto power_at = [&](const Vec3& pos) {
        const CVector g = transmit_frv(u, pos);
        return (g.adjoint() * q * g)(0).real();
    };
    // Ascent as descent on the negated, normalized power.
    auto neg = [&](const RVector& pos) { return -power_at(pos) / scale; };

    PositionVector x{RVector::Zero(3), u.region().lower, u.region().upper};
    double fx = neg(x.coords);
    for (int t = 1; t <= cfg.t_max; ++t) {
        const RVector grad = -channel_power_gradient(u, q, x.coords) / scale;
        LineSearchResult ls = backtrack_step(neg, x, fx, grad, cfg);
        if (!ls.accepted) break;
        const double change = fx - ls.value;
        x = std::move(ls.position);
        fx = ls.value;
        out.iterations = t;
        if (std::abs(change) < cfg.epsilon) break;
    }
    out.position = x.coords;
    out.power = channel_vector(u, out.position).squaredNorm();
    return out;
}

} // namespace mamac
