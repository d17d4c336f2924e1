// SPDX-License-Identifier: Apache-2.0
#include "mamac/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mamac;

namespace {

ScenarioConfig small() {
    ScenarioConfig c;
    c.n1 = 2;
    c.n2 = 2;
    c.users = 3;
    c.paths = 3;
    return c;
}

DescentConfig quick() {
    DescentConfig c = DescentConfig::for_wavelength(0.01);
    c.t_max = 20;
    return c;
}

TrialResult ok(double w) {
    TrialResult r;
    r.total_power_w = w;
    r.converged = true;
    return r;
}

} // namespace

TEST(Scheme, NamesRoundTrip) {
    const auto all = SchemeId::all();
    ASSERT_EQ(all.size(), 6u);
    for (const auto& s : all) EXPECT_EQ(SchemeId::parse(s.name()), s);
    EXPECT_EQ(SchemeId::parse("MA-MMSE")->positioning, Positioning::Ma);
    EXPECT_FALSE(SchemeId::parse("MA-MRC").has_value());
}

TEST(Aggregate, LinearMeanThenDbm) {
    EXPECT_NEAR(aggregate({ok(1.0)}).mean_dbm, 30.0, 1e-12);
    const Aggregate a = aggregate({ok(1.0), ok(3.0), TrialResult{}});
    EXPECT_NEAR(a.mean_dbm, 10.0 * std::log10(2000.0), 1e-12);
    EXPECT_EQ(a.count, 2);
    EXPECT_EQ(a.failures, 1);
    EXPECT_NEAR(a.mean_of_dbm, (30.0 + watts_to_dbm(3.0)) / 2.0, 1e-12);
    const Aggregate b = aggregate({ok(3.0), ok(1.0)});
    EXPECT_EQ(a.mean_w, b.mean_w);
    EXPECT_TRUE(std::isnan(aggregate({}).mean_dbm));
}

TEST(Trial, FpaEqualsFixedPositionPower) {
    Rng rng(1);
    const Scenario s = sample_scenario(small(), rng);
    Rng r2(2);
    const TrialResult t = run_trial(s, {Positioning::Fpa, Combining::Zf}, quick(), std::nullopt, r2);
    ASSERT_TRUE(t.converged);
    EXPECT_EQ(t.total_power_w, zf_total_power(channel_matrix(s, RVector::Zero(9)), s.eta(), s.noise_power));
}

TEST(Trial, MaNotWorseThanFpaAndMmseNotWorseThanZf) {
    Rng rng(3);
    const Scenario s = sample_scenario(small(), rng);
    std::map<std::string, double> p;
    for (const auto& sc : SchemeId::all()) {
        Rng r(4);
        const TrialResult t = run_trial(s, sc, quick(), std::nullopt, r);
        ASSERT_TRUE(t.converged) << sc.name();
        p[sc.name()] = t.total_power_w;
    }
    EXPECT_LE(p["MA-ZF"], p["FPA-ZF"]);
    EXPECT_LE(p["MA-MMSE"], p["FPA-MMSE"]);
    EXPECT_LE(p["FPA-MMSE"], p["FPA-ZF"]);
    EXPECT_LE(p["MCP-MMSE"], p["MCP-ZF"]);
}

TEST(Trial, ZeroFriErrorMatchesPerfectInformation) {
    Rng rng(5);
    const Scenario s = sample_scenario(small(), rng);
    for (const auto& sc : SchemeId::all()) {
        Rng a(6), b(6);
        const TrialResult perfect = run_trial(s, sc, quick(), std::nullopt, a);
        const TrialResult zero = run_trial(s, sc, quick(), FriError{0.0, 0.0}, b);
        EXPECT_EQ(perfect.total_power_w, zero.total_power_w) << sc.name();
    }
}

TEST(Trial, ImperfectFriStillProducesFeasiblePowersOnTrueChannel) {
    Rng rng(7);
    const Scenario s = sample_scenario(small(), rng);
    Rng r(8);
    const TrialResult t = run_trial(s, {Positioning::Ma, Combining::Mmse}, quick(), FriError{1.0, 0.1}, r);
    ASSERT_TRUE(t.converged);
    const CMatrix h = channel_matrix(s, t.positions);
    const auto fp = min_power_fixed_point(h, s.eta(), s.noise_power);
    EXPECT_NEAR(t.total_power_w / fp.solution.power.total, 1.0, 1e-4);
}

TEST(Sweep, PointMapping) {
    SweepSpec spec;
    spec.parameter = SweepParameter::Users;
    EXPECT_EQ(spec.point(8).first.users, 8);
    EXPECT_THROW(spec.point(8.5), std::invalid_argument);
    spec.parameter = SweepParameter::AodError;
    const auto [c, fri] = spec.point(1.5);
    ASSERT_TRUE(fri.has_value());
    EXPECT_EQ(fri->aod_max, 1.5);
    spec.parameter = SweepParameter::Region;
    EXPECT_EQ(spec.point(0.5).first.region_wavelengths, 0.5);
    spec.parameter = SweepParameter::Users;
    spec.values = {17};
    EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(Sweep, DeterministicAndIndependentOfJobs) {
    SweepSpec spec;
    spec.parameter = SweepParameter::Rate;
    spec.values = {1.0, 2.0};
    spec.base = small();
    spec.trials = 3;
    const SweepOutcome a = run_sweep(spec, quick(), 1);
    const SweepOutcome b = run_sweep(spec, quick(), 3);
    ASSERT_EQ(a.rows.size(), 12u);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].scheme, b.rows[i].scheme);
        EXPECT_EQ(a.rows[i].stats.mean_w, b.rows[i].stats.mean_w);
    }
    EXPECT_EQ(a.rows[0].parameter, "rate");
    EXPECT_EQ(a.rows[0].value, 1.0);
    EXPECT_EQ(a.rows[6].value, 2.0);
}

TEST(Sweep, CommonDrawsAcrossValues) {
    // Rate only rescales the targets, so ZF power scales exactly with eta.
    SweepSpec spec;
    spec.parameter = SweepParameter::Rate;
    spec.values = {1.0, 3.0};
    spec.base = small();
    spec.trials = 2;
    spec.schemes = {{Positioning::Fpa, Combining::Zf}};
    const SweepOutcome o = run_sweep(spec, quick(), 1);
    EXPECT_NEAR(o.rows[1].stats.mean_w / o.rows[0].stats.mean_w, 7.0, 1e-9);
}

TEST(ParallelFor, VisitsEachIndexOnceAndPropagatesErrors) {
    std::vector<int> hits(50, 0);
    parallel_for(50, 4, [&](std::size_t i) { ++hits[i]; });
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(5, 2, [](std::size_t i) { if (i == 3) throw std::runtime_error("x"); }),
                 std::runtime_error);
}

TEST(Convergence, TracesAveragedAndNonIncreasing) {
    const ConvergenceOutcome c = run_convergence(small(), 3, 9, quick(), 1);
    ASSERT_EQ(c.trials, 3);
    ASSERT_FALSE(c.rows.empty());
    for (std::size_t i = 1; i < c.rows.size(); ++i) {
        EXPECT_LE(c.rows[i].zf_mean_w, c.rows[i - 1].zf_mean_w);
        EXPECT_LE(c.rows[i].mmse_mean_w, c.rows[i - 1].mmse_mean_w);
    }
    EXPECT_LE(c.rows.back().mmse_mean_w, c.rows.back().zf_mean_w);
}
