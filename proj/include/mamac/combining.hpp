// SPDX-License-Identifier: Apache-2.0
//
// Linear receive combiners (ZF, MMSE, MRC), per-user SINR and the minimum
// transmit powers that meet per-user SINR targets eta_k.
#pragma once

#include "mamac/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace mamac {

// Column rank is declared full when sigma_min >= kRankTolerance * sigma_max.
inline constexpr double kRankTolerance = 1e-10;

struct PowerSolution {
    RVector powers;
    double total = std::numeric_limits<double>::infinity();
    bool feasible = false;

    static PowerSolution infeasible(Eigen::Index k) {
        return {RVector::Constant(k, std::numeric_limits<double>::quiet_NaN()),
                std::numeric_limits<double>::infinity(), false};
    }
};

struct CombinerSolution {
    CMatrix combiner; // N x K
    PowerSolution power;
    RVector sinr;
};

// A(k, q) = |w_k^H h_q|^2 and b(k) = ||w_k||^2 sigma^2 for the MMSE combiner,
// so that SINR_k = A_kk p_k / (sum_{q != k} A_kq p_q + b_k).
struct MmseCoefficients {
    RMatrix gains;
    RVector noise;
};

inline double column_conditioning(const CMatrix& h) {
    Eigen::JacobiSVD<CMatrix> svd(h);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || !(s(0) > 0.0)) return 0.0;
    return s(s.size() - 1) / s(0);
}

inline void require_full_column_rank(const CMatrix& h) {
    if (h.cols() > h.rows()) {
        throw RankDeficientError("multiple-access matrix has more columns than rows", 0.0);
    }
    const double c = column_conditioning(h);
    if (!(c >= kRankTolerance)) {
        std::ostringstream os;
        os << "multiple-access matrix is not of full column rank (sigma_min/sigma_max = " << c << ")";
        throw RankDeficientError(os.str(), c);
    }
}

inline RVector sinr(const CMatrix& w, const CMatrix& h, const RVector& p, double sigma2) {
    const CMatrix g = w.adjoint() * h; // g(k, q) = w_k^H h_q
    const Eigen::Index K = h.cols();
    RVector out(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        double interference = 0.0;
        for (Eigen::Index q = 0; q < K; ++q) {
            if (q != k) interference += std::norm(g(k, q)) * p(q);
        }
        out(k) = std::norm(g(k, k)) * p(k) / (interference + w.col(k).squaredNorm() * sigma2);
    }
    return out;
}

inline CMatrix zf_combiner(const CMatrix& h) {
    require_full_column_rank(h);
    const CMatrix gram = h.adjoint() * h;
    return h * gram.ldlt().solve(CMatrix::Identity(h.cols(), h.cols()));
}

// Per-user minimum powers under ZF: p_k = ||W_ZF(:, k)||^2 eta_k sigma^2.
inline PowerSolution zf_powers(const CMatrix& h, const RVector& eta, double sigma2) {
    const CMatrix w = zf_combiner(h);
    PowerSolution out;
    out.powers = w.colwise().squaredNorm().transpose().cwiseProduct(eta) * sigma2;
    out.total = out.powers.sum();
    out.feasible = true;
    return out;
}

// tr{(H^H H)^-1 Omega}, Omega = diag(eta_k sigma^2). Returns +inf when the
// Gram matrix is not positive definite. No conditioning check; meant for
// objective evaluation inside line searches.
inline double zf_total_power_unchecked(const CMatrix& h, const RVector& eta, double sigma2) {
    const CMatrix gram = h.adjoint() * h;
    Eigen::LLT<CMatrix> llt(gram);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const CMatrix inv = llt.solve(CMatrix::Identity(h.cols(), h.cols()));
    double total = 0.0;
    for (Eigen::Index k = 0; k < h.cols(); ++k) {
        const double d = inv(k, k).real();
        if (!(d > 0.0) || !std::isfinite(d)) return std::numeric_limits<double>::infinity();
        total += d * eta(k);
    }
    return total * sigma2;
}

inline double zf_total_power(const CMatrix& h, const RVector& eta, double sigma2) {
    require_full_column_rank(h);
    return zf_total_power_unchecked(h, eta, sigma2);
}

// W = (H P H^H + sigma^2 I)^-1 H.
inline CMatrix mmse_combiner(const CMatrix& h, const RVector& p, double sigma2) {
    CMatrix c = h * p.cast<Complex>().asDiagonal() * h.adjoint();
    c.diagonal().array() += sigma2;
    return c.llt().solve(h);
}

inline MmseCoefficients coefficients_for(const CMatrix& w, const CMatrix& h, double sigma2) {
    const CMatrix g = w.adjoint() * h;
    return {g.cwiseAbs2(), w.colwise().squaredNorm().transpose() * sigma2};
}

inline MmseCoefficients mmse_coefficients(const CMatrix& h, const RVector& p, double sigma2) {
    return coefficients_for(mmse_combiner(h, p, sigma2), h, sigma2);
}

// Solves (D - Psi) p = b with D = diag(A_kk / eta_k) and Psi the off-diagonal
// part of A: every user's SINR equals its target.
inline PowerSolution solve_power_balance(const RMatrix& a, const RVector& b, const RVector& eta) {
    const Eigen::Index K = a.rows();
    RMatrix m = -a;
    for (Eigen::Index k = 0; k < K; ++k) m(k, k) = a(k, k) / eta(k);
    Eigen::FullPivLU<RMatrix> lu(m);
    if (!lu.isInvertible()) return PowerSolution::infeasible(K);
    PowerSolution out;
    out.powers = lu.solve(b);
    if (!out.powers.allFinite() || (out.powers.array() < 0.0).any()) return PowerSolution::infeasible(K);
    out.total = out.powers.sum();
    out.feasible = true;
    return out;
}

// Spectral radius of D^-1 Psi.
inline double balance_spectral_radius(const RMatrix& a, const RVector& eta) {
    const Eigen::Index K = a.rows();
    RMatrix m(K, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        for (Eigen::Index q = 0; q < K; ++q) {
            m(k, q) = (q == k) ? 0.0 : eta(k) * a(k, q) / a(k, k);
        }
    }
    if (K == 1) return 0.0;
    Eigen::EigenSolver<RMatrix> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Perron-Frobenius condition rho(D^-1 Psi) < 1: the balance system has a
// non-negative solution for every b > 0.
inline bool power_feasible(const RMatrix& a, const RVector& eta) {
    return balance_spectral_radius(a, eta) < 1.0;
}

struct FixedPointResult {
    CombinerSolution solution;
    // Powers that weight the covariance of solution.combiner.
    RVector combiner_powers;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
};

// Minimum total power at fixed channels: alternate the MMSE combiner for the
// current powers with the power-balance solution for that combiner. Starts
// from the ZF powers, or from `warm_start` (a power vector used to weight the
// first MMSE combiner) when given. The total is non-increasing; the returned
// (combiner, powers) meet every SINR target exactly.
inline FixedPointResult min_power_fixed_point(const CMatrix& h, const RVector& eta, double sigma2,
                                              double tol = 1e-6, int max_iter = 500,
                                              const RVector* warm_start = nullptr) {
    FixedPointResult r;
    CMatrix w;
    PowerSolution cur;
    RVector weights;

    if (warm_start != nullptr) {
        w = mmse_combiner(h, *warm_start, sigma2);
        const MmseCoefficients c = coefficients_for(w, h, sigma2);
        cur = solve_power_balance(c.gains, c.noise, eta);
        weights = *warm_start;
    }
    if (!cur.feasible) {
        w = zf_combiner(h);
        cur = zf_powers(h, eta, sigma2);
        weights = RVector::Zero(h.cols());
    }
    r.trace.push_back(cur.total);

    for (int it = 0; it < max_iter; ++it) {
        const CMatrix w_next = mmse_combiner(h, cur.powers, sigma2);
        const MmseCoefficients c = coefficients_for(w_next, h, sigma2);
        PowerSolution next = solve_power_balance(c.gains, c.noise, eta);
        if (!next.feasible || next.total > cur.total) {
            r.converged = next.feasible;
            break;
        }
        const double decrease = cur.total - next.total;
        weights = cur.powers;
        w = w_next;
        cur = std::move(next);
        r.trace.push_back(cur.total);
        r.iterations = it + 1;
        if (decrease < tol) {
            r.converged = true;
            break;
        }
    }

    r.solution.combiner = std::move(w);
    r.solution.power = cur;
    r.solution.sinr = sinr(r.solution.combiner, h, cur.powers, sigma2);
    r.combiner_powers = std::move(weights);
    return r;
}

// Single-user minimum power with matched filtering: eta sigma^2 / ||h||^2.
inline PowerSolution mrc_power(const CVector& h, double eta, double sigma2) {
    const double g = h.squaredNorm();
    if (!(g > 0.0)) return PowerSolution::infeasible(1);
    PowerSolution out;
    out.powers = RVector::Constant(1, eta * sigma2 / g);
    out.total = out.powers(0);
    out.feasible = true;
    return out;
}

// Per-user receive powers normalized by the post-combining noise power:
// signal A_kk p_k / b_k and interference sum_{q != k} A_kq p_q / b_k.
struct NormalizedPowers {
    RVector signal;
    RVector interference;
};

inline NormalizedPowers normalized_powers(const CMatrix& w, const CMatrix& h, const RVector& p, double sigma2) {
    const MmseCoefficients c = coefficients_for(w, h, sigma2);
    const Eigen::Index K = h.cols();
    NormalizedPowers out{RVector(K), RVector(K)};
    for (Eigen::Index k = 0; k < K; ++k) {
        double interference = 0.0;
        for (Eigen::Index q = 0; q < K; ++q) {
            if (q != k) interference += c.gains(k, q) * p(q);
        }
        out.signal(k) = c.gains(k, k) * p(k) / c.noise(k);
        out.interference(k) = interference / c.noise(k);
    }
    return out;
}

} // namespace mamac
