// SPDX-License-Identifier: Apache-2.0
#include "mamac/channel.hpp"
#include "mamac/combining.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mamac;

namespace {

struct Instance {
    CMatrix h;
    RVector eta;
    double sigma2;
};

Instance instance(std::uint64_t seed, ScenarioConfig cfg = {}) {
    Rng rng(seed);
    const Scenario s = sample_scenario(cfg, rng);
    return {channel_matrix(s, RVector::Zero(3 * s.user_count())), s.eta(), s.noise_power};
}

std::vector<double> to_std(const RVector& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

TEST(Zf, NullsInterferenceAndMeetsTargets) {
    const auto in = instance(1);
    const CMatrix w = zf_combiner(in.h);
    const CMatrix g = w.adjoint() * in.h;
    EXPECT_LT((g - CMatrix::Identity(12, 12)).norm(), 1e-8);
    const PowerSolution p = zf_powers(in.h, in.eta, in.sigma2);
    const RVector s = sinr(w, in.h, p.powers, in.sigma2);
    for (Eigen::Index k = 0; k < s.size(); ++k) EXPECT_NEAR(s(k) / in.eta(k), 1.0, 1e-9);
}

TEST(Zf, TotalMatchesGaussJordanOracle) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto in = instance(seed);
        const double ref = oracle::zf_total(oracle::columns(in.h), to_std(in.eta), in.sigma2);
        EXPECT_NEAR(zf_total_power(in.h, in.eta, in.sigma2) / ref, 1.0, 1e-9);
        EXPECT_NEAR(zf_powers(in.h, in.eta, in.sigma2).total / ref, 1.0, 1e-9);
    }
}

TEST(Zf, SingleUserReducesToMatchedFilter) {
    ScenarioConfig cfg;
    cfg.users = 1;
    const auto in = instance(3, cfg);
    EXPECT_NEAR(zf_total_power(in.h, in.eta, in.sigma2) / mrc_power(in.h.col(0), in.eta(0), in.sigma2).total, 1.0, 1e-12);
}

TEST(Zf, RejectsRankDeficientChannels) {
    CMatrix h = CMatrix::Random(4, 3);
    h.col(2) = h.col(0) * Complex(2.0, -1.0);
    EXPECT_THROW(zf_combiner(h), RankDeficientError);
    EXPECT_THROW(zf_total_power(h, RVector::Ones(3), 1.0), RankDeficientError);
    EXPECT_THROW(zf_combiner(CMatrix::Random(2, 3)), RankDeficientError);
    try {
        require_full_column_rank(h);
    } catch (const RankDeficientError& e) {
        EXPECT_LT(e.conditioning(), 1e-10);
    }
}

TEST(Sinr, MatchesScalarLoop) {
    const auto in = instance(4);
    const RVector p = RVector::LinSpaced(12, 0.01, 0.5);
    const CMatrix w = mmse_combiner(in.h, p, in.sigma2);
    const RVector s = sinr(w, in.h, p, in.sigma2);
    const auto hc = oracle::columns(in.h);
    const auto wc = oracle::columns(w);
    for (std::size_t k = 0; k < 12; ++k) {
        EXPECT_NEAR(s(static_cast<Eigen::Index>(k)) / oracle::sinr(wc[k], hc, to_std(p), k, in.sigma2), 1.0, 1e-10);
    }
}

TEST(Mmse, CombinerMaximizesEachSinr) {
    // Any perturbation of the MMSE combiner column lowers that user's SINR.
    const auto in = instance(5);
    const RVector p = RVector::Constant(12, 0.05);
    const CMatrix w = mmse_combiner(in.h, p, in.sigma2);
    const RVector s0 = sinr(w, in.h, p, in.sigma2);
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        CMatrix w2 = w;
        for (Eigen::Index n = 0; n < w.rows(); ++n) w2(n, 0) += 0.05 * w.col(0).norm() / 4.0 * rng.complex_normal(1.0);
        EXPECT_LE(sinr(w2, in.h, p, in.sigma2)(0), s0(0) * (1.0 + 1e-12));
    }
}

TEST(PowerBalance, SolutionMeetsTargetsExactly) {
    const auto in = instance(6);
    const RVector p0 = zf_powers(in.h, in.eta, in.sigma2).powers;
    const CMatrix w = mmse_combiner(in.h, p0, in.sigma2);
    const MmseCoefficients c = coefficients_for(w, in.h, in.sigma2);
    const PowerSolution sol = solve_power_balance(c.gains, c.noise, in.eta);
    ASSERT_TRUE(sol.feasible);
    const RVector s = sinr(w, in.h, sol.powers, in.sigma2);
    for (Eigen::Index k = 0; k < 12; ++k) EXPECT_NEAR(s(k) / in.eta(k), 1.0, 1e-9);
}

TEST(PowerBalance, InfeasibleWhenInterferenceDominates) {
    RMatrix a(2, 2);
    a << 1.0, 2.0, 2.0, 1.0;
    const RVector eta = RVector::Ones(2);
    EXPECT_FALSE(power_feasible(a, eta));
    const PowerSolution s = solve_power_balance(a, RVector::Ones(2), eta);
    EXPECT_FALSE(s.feasible);
    EXPECT_TRUE(std::isinf(s.total));
}

TEST(PowerBalance, SpectralRadiusMatchesPowerIteration) {
    Rng rng(7);
    for (int t = 0; t < 30; ++t) {
        const int K = 2 + static_cast<int>(rng.index(8));
        RMatrix a(K, K);
        RVector eta(K);
        for (int i = 0; i < K; ++i) {
            eta(i) = rng.uniform(0.5, 5.0);
            for (int j = 0; j < K; ++j) a(i, j) = rng.uniform(0.0, 1.0) * (i == j ? 5.0 : 0.3);
        }
        std::vector<std::vector<double>> m(K, std::vector<double>(K, 0.0));
        for (int i = 0; i < K; ++i) {
            for (int j = 0; j < K; ++j) m[i][j] = i == j ? 0.0 : eta(i) * a(i, j) / a(i, i);
        }
        EXPECT_NEAR(balance_spectral_radius(a, eta), oracle::perron_root(m), 1e-8);
    }
}

TEST(FixedPoint, MonotoneAndBelowZf) {
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
        const auto in = instance(seed);
        const FixedPointResult r = min_power_fixed_point(in.h, in.eta, in.sigma2);
        ASSERT_TRUE(r.solution.power.feasible);
        for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
        EXPECT_LE(r.solution.power.total, zf_total_power(in.h, in.eta, in.sigma2));
        for (Eigen::Index k = 0; k < 12; ++k) EXPECT_NEAR(r.solution.sinr(k) / in.eta(k), 1.0, 1e-9);
        // The combiner is the MMSE combiner of the reported weights.
        EXPECT_LT((mmse_combiner(in.h, r.combiner_powers, in.sigma2) - r.solution.combiner).norm(),
                  1e-9 * r.solution.combiner.norm());
    }
}

TEST(FixedPoint, WarmStartFromConvergedPowersIsStationary) {
    const auto in = instance(20);
    const FixedPointResult a = min_power_fixed_point(in.h, in.eta, in.sigma2, 1e-12, 2000);
    const FixedPointResult b = min_power_fixed_point(in.h, in.eta, in.sigma2, 1e-12, 2000, &a.combiner_powers);
    EXPECT_NEAR(b.solution.power.total / a.solution.power.total, 1.0, 1e-9);
}

TEST(Mrc, SingleUserPower) {
    CVector h(3);
    h << Complex(1, 0), Complex(0, 2), Complex(-2, 0);
    EXPECT_DOUBLE_EQ(mrc_power(h, 3.0, 0.5).total, 3.0 * 0.5 / 9.0);
    EXPECT_FALSE(mrc_power(CVector::Zero(3), 1.0, 1.0).feasible);
}

TEST(NormalizedPowers, ZfHasNoInterference) {
    const auto in = instance(30);
    const PowerSolution p = zf_powers(in.h, in.eta, in.sigma2);
    const NormalizedPowers np = normalized_powers(zf_combiner(in.h), in.h, p.powers, in.sigma2);
    EXPECT_LT(np.interference.maxCoeff(), 1e-12);
    for (Eigen::Index k = 0; k < 12; ++k) EXPECT_NEAR(np.signal(k) / in.eta(k), 1.0, 1e-9);
}
