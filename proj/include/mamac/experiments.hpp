// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo harness: scheme matrix {FPA, MCP, MA} x {ZF, MMSE}, parameter
// sweeps with paired per-trial scenarios, and linear-domain aggregation.
#pragma once

#include "mamac/channel.hpp"
#include "mamac/combining.hpp"
#include "mamac/optimizer.hpp"
#include "mamac/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace mamac {

enum class Positioning { Fpa, Mcp, Ma };
enum class Combining { Zf, Mmse };

struct SchemeId {
    Positioning positioning = Positioning::Fpa;
    Combining combining = Combining::Zf;

    bool operator==(const SchemeId&) const = default;

    std::string name() const {
        std::string s = positioning == Positioning::Fpa ? "FPA" : positioning == Positioning::Mcp ? "MCP" : "MA";
        return s + (combining == Combining::Zf ? "-ZF" : "-MMSE");
    }

    static std::optional<SchemeId> parse(std::string_view name) {
        for (const SchemeId& s : all()) {
            if (s.name() == name) return s;
        }
        return std::nullopt;
    }

    static std::vector<SchemeId> all() {
        std::vector<SchemeId> out;
        for (auto p : {Positioning::Fpa, Positioning::Mcp, Positioning::Ma}) {
            for (auto c : {Combining::Zf, Combining::Mmse}) out.push_back({p, c});
        }
        return out;
    }
};

struct FriError {
    double aod_max = 0.0;      // mu
    double prm_variance = 0.0; // nu
};

struct TrialOptions {
    // Compute MCP positions from the estimated FRI too (off: MCP sees truth).
    bool mcp_uses_estimated_fri = false;
};

struct TrialResult {
    SchemeId scheme;
    double total_power_w = std::numeric_limits<double>::quiet_NaN();
    // False when the trial produced no feasible power allocation.
    bool converged = false;
    int iterations = 0;
    std::vector<double> trace;
    std::vector<IterationPowers> diagnostics;
    RVector positions;
};

// Minimum total power on the true channel at fixed positions. For MMSE the
// power fixed point may be warm-started from an optimizer's final weights.
inline std::optional<double> evaluate_positions(const Scenario& s, const RVector& upos, Combining combining,
                                                const DescentConfig& cfg, const RVector* warm_start = nullptr) {
    const CMatrix h = channel_matrix(s, upos);
    try {
        if (combining == Combining::Zf) {
            return zf_total_power(h, s.eta(), s.noise_power);
        }
        require_full_column_rank(h);
        const FixedPointResult fp =
            min_power_fixed_point(h, s.eta(), s.noise_power, cfg.inner_tol, cfg.inner_max_iter, warm_start);
        if (!fp.solution.power.feasible) return std::nullopt;
        return fp.solution.power.total;
    } catch (const RankDeficientError&) {
        return std::nullopt;
    }
}

// One scheme on one scenario. With an FRI error the positions are optimized
// on an estimate of the scenario drawn from `rng`; combiner and powers are
// always computed on the true channel.
inline TrialResult run_trial(const Scenario& s, SchemeId scheme, const DescentConfig& cfg,
                             std::optional<FriError> fri, Rng& rng, const TrialOptions& opt = {}) {
    TrialResult r;
    r.scheme = scheme;

    const bool use_estimate = fri.has_value() && (scheme.positioning == Positioning::Ma ||
                                                  (scheme.positioning == Positioning::Mcp && opt.mcp_uses_estimated_fri));
    std::optional<Scenario> estimate;
    if (use_estimate) estimate = perturb_fri(s, fri->aod_max, fri->prm_variance, rng);
    const Scenario& planning = estimate ? *estimate : s;

    RVector upos = RVector::Zero(3 * s.user_count());
    std::optional<double> total;
    try {
        switch (scheme.positioning) {
        case Positioning::Fpa:
            total = evaluate_positions(s, upos, scheme.combining, cfg);
            break;
        case Positioning::Mcp:
            for (int k = 0; k < s.user_count(); ++k) {
                upos.segment<3>(3 * k) = maximize_channel_power(planning.users[static_cast<std::size_t>(k)], cfg).position;
            }
            total = evaluate_positions(s, upos, scheme.combining, cfg);
            break;
        case Positioning::Ma: {
            OptimizeResult o = scheme.combining == Combining::Zf ? optimize_zf(planning, cfg) : optimize_mmse(planning, cfg);
            upos = o.positions.coords;
            r.iterations = o.iterations;
            r.trace = std::move(o.trace);
            r.diagnostics = std::move(o.diagnostics);
            // The optimizer's own total is already on the true channel unless
            // it planned on an estimate that differs there.
            if (!estimate || channel_matrix(planning, upos) == channel_matrix(s, upos)) {
                total = o.total_power;
            } else {
                total = evaluate_positions(s, upos, scheme.combining, cfg,
                                           scheme.combining == Combining::Mmse ? &o.combiner_powers : nullptr);
            }
            break;
        }
        }
    } catch (const RankDeficientError&) {
        total.reset();
    } catch (const InfeasibleError&) {
        total.reset();
    }

    r.positions = std::move(upos);
    if (total && std::isfinite(*total) && *total > 0.0) {
        r.total_power_w = *total;
        r.converged = true;
    }
    return r;
}

struct Aggregate {
    double mean_dbm = std::numeric_limits<double>::quiet_NaN();
    double mean_w = std::numeric_limits<double>::quiet_NaN();
    // Mean of per-trial dBm values, for comparison with log-domain averaging.
    double mean_of_dbm = std::numeric_limits<double>::quiet_NaN();
    int count = 0;
    int failures = 0;
};

// Linear-watt mean over converged trials, converted to dBm once.
inline Aggregate aggregate(const std::vector<TrialResult>& results) {
    Aggregate a;
    double sum_w = 0.0;
    double sum_dbm = 0.0;
    std::vector<double> w;
    for (const auto& r : results) {
        if (r.converged) {
            w.push_back(r.total_power_w);
        } else {
            ++a.failures;
        }
    }
    // Summing in sorted order makes the result independent of input order.
    std::sort(w.begin(), w.end());
    for (double x : w) {
        sum_w += x;
        sum_dbm += watts_to_dbm(x);
    }
    a.count = static_cast<int>(w.size());
    if (a.count > 0) {
        a.mean_w = sum_w / a.count;
        a.mean_dbm = watts_to_dbm(a.mean_w);
        a.mean_of_dbm = sum_dbm / a.count;
    }
    return a;
}

enum class SweepParameter { Rate, Users, Paths, AoaPool, Region, AodError, PrmError };

inline std::string to_string(SweepParameter p) {
    switch (p) {
    case SweepParameter::Rate: return "rate";
    case SweepParameter::Users: return "users";
    case SweepParameter::Paths: return "paths";
    case SweepParameter::AoaPool: return "aoa_pool";
    case SweepParameter::Region: return "region";
    case SweepParameter::AodError: return "aod_error";
    case SweepParameter::PrmError: return "prm_error";
    }
    return "unknown";
}

struct SweepSpec {
    SweepParameter parameter = SweepParameter::Rate;
    std::vector<double> values;
    ScenarioConfig base;
    int trials = 200;
    std::vector<SchemeId> schemes = SchemeId::all();
    std::uint64_t seed = 1;
    TrialOptions options;

    // Scenario configuration and FRI error for one sweep value.
    std::pair<ScenarioConfig, std::optional<FriError>> point(double v) const {
        ScenarioConfig c = base;
        std::optional<FriError> fri;
        auto as_count = [&](double x) {
            if (x != std::floor(x)) throw std::invalid_argument(to_string(parameter) + " values must be integers");
            return static_cast<int>(x);
        };
        switch (parameter) {
        case SweepParameter::Rate: c.rate = v; break;
        case SweepParameter::Users: c.users = as_count(v); break;
        case SweepParameter::Paths: c.paths = as_count(v); break;
        case SweepParameter::AoaPool: c.aoa_pool = as_count(v); break;
        case SweepParameter::Region: c.region_wavelengths = v; break;
        case SweepParameter::AodError: fri = FriError{v, 0.0}; break;
        case SweepParameter::PrmError: fri = FriError{0.0, v}; break;
        }
        if (fri && (!(fri->aod_max >= 0.0) || !(fri->prm_variance >= 0.0))) {
            throw std::invalid_argument("FRI error levels must be non-negative");
        }
        return {c, fri};
    }

    void validate() const {
        if (values.empty()) throw std::invalid_argument("SweepSpec: no sweep values");
        if (trials < 1) throw std::invalid_argument("SweepSpec: trials must be >= 1");
        if (schemes.empty()) throw std::invalid_argument("SweepSpec: no schemes selected");
        for (double v : values) point(v).first.validate();
    }
};

struct SweepRow {
    std::string parameter;
    double value = 0.0;
    SchemeId scheme;
    Aggregate stats;
};

struct SweepOutcome {
    std::vector<SweepRow> rows;
    // results[value][trial][scheme], in SweepSpec order.
    std::vector<std::vector<std::vector<TrialResult>>> results;
    int resamples = 0;
};

inline unsigned default_jobs() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1u : n;
}

// Calls work(i) for i in [0, n) on up to `jobs` threads. Each index is
// processed exactly once; the caller stores results by index.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& work) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (unsigned t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    work(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

inline constexpr int kMaxResamples = 100;

// Scenario for one trial. Seeds depend on (master seed, trial index, attempt)
// only, so every sweep value reuses the same random draws for a trial.
// Draws whose multiple-access matrix at the origin is rank deficient are
// redrawn; the number of redraws is returned through `resamples`.
inline Scenario sample_trial_scenario(const ScenarioConfig& cfg, std::uint64_t seed, std::uint64_t trial,
                                      int& resamples, std::uint64_t& attempt_out) {
    for (std::uint64_t attempt = 0; attempt < static_cast<std::uint64_t>(kMaxResamples); ++attempt) {
        Rng rng(derive_seed({seed, trial, attempt}));
        Scenario s = sample_scenario(cfg, rng);
        const CMatrix h = channel_matrix(s, RVector::Zero(3 * s.user_count()));
        if (column_conditioning(h) >= kRankTolerance) {
            attempt_out = attempt;
            return s;
        }
        ++resamples;
    }
    throw std::runtime_error("could not draw a full-rank scenario");
}

inline std::uint64_t fri_seed(std::uint64_t seed, std::uint64_t trial, std::uint64_t attempt) {
    return derive_seed({seed, trial, attempt, 0x46524931ULL});
}

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

inline SweepOutcome run_sweep(const SweepSpec& spec, const DescentConfig& cfg, unsigned jobs = 1,
                              const ProgressFn& progress = {}) {
    spec.validate();
    cfg.validate();
    const std::size_t nv = spec.values.size();
    const auto nt = static_cast<std::size_t>(spec.trials);
    SweepOutcome out;
    out.results.assign(nv, std::vector<std::vector<TrialResult>>(nt));
    std::vector<int> resamples(nv * nt, 0);
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;

    parallel_for(nv * nt, jobs, [&](std::size_t item) {
        const std::size_t vi = item / nt;
        const std::size_t ti = item % nt;
        const auto [scfg, fri] = spec.point(spec.values[vi]);
        std::uint64_t attempt = 0;
        const Scenario s = sample_trial_scenario(scfg, spec.seed, ti, resamples[item], attempt);
        auto& slot = out.results[vi][ti];
        slot.reserve(spec.schemes.size());
        for (const SchemeId& scheme : spec.schemes) {
            // Same estimate for every scheme of the trial.
            Rng rng(fri_seed(spec.seed, ti, attempt));
            slot.push_back(run_trial(s, scheme, cfg, fri, rng, spec.options));
        }
        const std::size_t d = ++done;
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(d, nv * nt);
        }
    });

    for (int r : resamples) out.resamples += r;
    for (std::size_t vi = 0; vi < nv; ++vi) {
        for (std::size_t si = 0; si < spec.schemes.size(); ++si) {
            std::vector<TrialResult> col;
            col.reserve(nt);
            for (std::size_t ti = 0; ti < nt; ++ti) col.push_back(out.results[vi][ti][si]);
            out.rows.push_back({to_string(spec.parameter), spec.values[vi], spec.schemes[si], aggregate(col)});
        }
    }
    return out;
}

// Per-iteration means of the MA-ZF and MA-MMSE traces over trials. Traces
// that stop early are extended with their final value.
struct ConvergenceRow {
    int iteration = 0;
    double zf_mean_w = 0.0;
    double mmse_mean_w = 0.0;
    double signal_norm = 0.0;       // mean normalized signal power (linear)
    double interference_norm = 0.0; // mean normalized interference power (linear)
};

struct ConvergenceOutcome {
    std::vector<ConvergenceRow> rows;
    int trials = 0;
    int failures = 0;
    int resamples = 0;
};

inline ConvergenceOutcome run_convergence(const ScenarioConfig& base, int trials, std::uint64_t seed,
                                          const DescentConfig& cfg, unsigned jobs = 1, const ProgressFn& progress = {}) {
    base.validate();
    cfg.validate();
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    const auto nt = static_cast<std::size_t>(trials);
    std::vector<OptimizeResult> zf(nt), mmse(nt);
    std::vector<char> ok(nt, 0);
    std::vector<int> resamples(nt, 0);
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;

    parallel_for(nt, jobs, [&](std::size_t ti) {
        std::uint64_t attempt = 0;
        const Scenario s = sample_trial_scenario(base, seed, ti, resamples[ti], attempt);
        try {
            zf[ti] = optimize_zf(s, cfg);
            mmse[ti] = optimize_mmse(s, cfg);
            ok[ti] = 1;
        } catch (const RankDeficientError&) {
        } catch (const InfeasibleError&) {
        }
        const std::size_t d = ++done;
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(d, nt);
        }
    });

    ConvergenceOutcome out;
    std::size_t len = 0;
    for (std::size_t ti = 0; ti < nt; ++ti) {
        out.resamples += resamples[ti];
        if (!ok[ti]) {
            ++out.failures;
            continue;
        }
        ++out.trials;
        len = std::max({len, zf[ti].trace.size(), mmse[ti].trace.size()});
    }
    auto at = [](const auto& v, std::size_t i) { return v[std::min(i, v.size() - 1)]; };
    for (std::size_t i = 0; i < len; ++i) {
        ConvergenceRow row;
        row.iteration = static_cast<int>(i);
        for (std::size_t ti = 0; ti < nt; ++ti) {
            if (!ok[ti]) continue;
            row.zf_mean_w += at(zf[ti].trace, i);
            row.mmse_mean_w += at(mmse[ti].trace, i);
            row.signal_norm += at(mmse[ti].diagnostics, i).signal;
            row.interference_norm += at(mmse[ti].diagnostics, i).interference;
        }
        const double n = out.trials;
        row.zf_mean_w /= n;
        row.mmse_mean_w /= n;
        row.signal_norm /= n;
        row.interference_norm /= n;
        out.rows.push_back(row);
    }
    return out;
}

} // namespace mamac
