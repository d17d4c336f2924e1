// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Each subcommand runs one experiment and writes CSV
// to --out (or stdout); progress and diagnostics go to the error stream.
#pragma once

#include "mamac/experiments.hpp"
#include "mamac/io.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mamac::cli {

struct RunConfig {
    ScenarioConfig scenario;
    DescentConfig descent;
    std::optional<double> fd_delta; // default wavelength * 1e-5
    int trials = 200;
    std::uint64_t seed = 1;
    std::string out;
    unsigned jobs = default_jobs();
    std::vector<double> values;
    std::vector<std::string> schemes;
    bool log_average = false;
    bool mcp_uses_estimated_fri = false;
    bool quiet = false;
};

struct SweepCommand {
    const char* name;
    SweepParameter parameter;
    const char* help;
    std::vector<double> default_values;
    std::vector<std::string> default_schemes;
};

inline const std::vector<SweepCommand>& sweep_commands() {
    static const std::vector<std::string> all = {"FPA-ZF", "FPA-MMSE", "MCP-ZF", "MCP-MMSE", "MA-ZF", "MA-MMSE"};
    static const std::vector<std::string> fri = {"FPA-ZF", "FPA-MMSE", "MA-ZF", "MA-MMSE"};
    static const std::vector<SweepCommand> cmds = {
        {"sweep-rate", SweepParameter::Rate, "Total power versus per-user rate target (bps/Hz)", {1, 2, 3, 4, 5}, all},
        {"sweep-users", SweepParameter::Users, "Total power versus number of users", {4, 6, 8, 10, 12, 14, 16}, all},
        {"sweep-paths", SweepParameter::Paths, "Total power versus paths per user", {2, 4, 6, 8, 10, 12}, all},
        {"sweep-aoas", SweepParameter::AoaPool, "Total power versus size of the shared AoA pool", {8, 12, 16, 20, 24, 28}, all},
        {"sweep-region", SweepParameter::Region, "Total power versus moving-region side J/lambda", {0.1, 0.5, 1, 2, 3, 4}, all},
        {"sweep-aod-error", SweepParameter::AodError, "Total power versus maximum AoD error mu", {0, 0.5, 1, 1.5, 2}, fri},
        {"sweep-prm-error", SweepParameter::PrmError, "Total power versus normalized PRM error variance nu", {0, 0.05, 0.1, 0.15, 0.2}, fri},
    };
    return cmds;
}

inline void add_common_options(CLI::App& app, RunConfig& rc) {
    auto& s = rc.scenario;
    auto& d = rc.descent;
    app.add_option("--trials", rc.trials, "Monte Carlo trials per point")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--seed", rc.seed, "Master random seed")->capture_default_str();
    app.add_option("--out", rc.out, "Output CSV path (default: stdout)");
    app.add_option("--jobs", rc.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--values", rc.values, "Comma-separated sweep values")->delimiter(',');
    app.add_option("--schemes", rc.schemes, "Comma-separated schemes, e.g. MA-ZF,FPA-MMSE")->delimiter(',');
    app.add_flag("--log-average", rc.log_average, "Also emit the mean of per-trial dBm values");
    app.add_flag("--mcp-estimated-fri", rc.mcp_uses_estimated_fri, "Compute MCP positions from the estimated FRI");
    app.add_flag("--quiet", rc.quiet, "No progress output");

    app.add_option("--n1", s.n1, "BS array columns (N1)")->capture_default_str()->group("Scenario");
    app.add_option("--n2", s.n2, "BS array rows (N2)")->capture_default_str()->group("Scenario");
    app.add_option("--users", s.users, "Number of users K")->capture_default_str()->group("Scenario");
    app.add_option("--paths", s.paths, "Paths per user L")->capture_default_str()->group("Scenario");
    app.add_option("--aoas", s.aoa_pool, "Shared AoA pool size S")->capture_default_str()->group("Scenario");
    app.add_option("--rate", s.rate, "Rate target r (bps/Hz)")->capture_default_str()->group("Scenario");
    app.add_option("--region", s.region_wavelengths, "Moving-region side J/lambda")->capture_default_str()->group("Scenario");
    app.add_option("--noise-dbm", s.noise_dbm, "Noise power (dBm)")->capture_default_str()->group("Scenario");
    app.add_option("--c0-db", s.c0_db, "Channel gain at 1 m (dB)")->capture_default_str()->group("Scenario");
    app.add_option("--alpha", s.alpha, "Path-loss exponent")->capture_default_str()->group("Scenario");
    app.add_option("--wavelength", s.wavelength, "Carrier wavelength (m)")->capture_default_str()->group("Scenario");
    app.add_option("--distance-min", s.distance_min, "Minimum user distance (m)")->capture_default_str()->group("Scenario");
    app.add_option("--distance-max", s.distance_max, "Maximum user distance (m)")->capture_default_str()->group("Scenario");
    app.add_option("--spacing", s.spacing_wavelengths, "BS antenna spacing (wavelengths)")->capture_default_str()->group("Scenario");
    const std::map<std::string, GainConvention> gains{{"power", GainConvention::PowerLaw},
                                                      {"amplitude", GainConvention::AmplitudeSquared}};
    app.add_option("--gain-law", s.gain, "Path-loss law acts on power or amplitude")
        ->transform(CLI::CheckedTransformer(gains, CLI::ignore_case))
        ->default_str("power")
        ->group("Scenario");

    app.add_option("--t-max", d.t_max, "Maximum gradient iterations")->capture_default_str()->group("Descent");
    app.add_option("--tau0", d.tau0, "Initial step size")->capture_default_str()->group("Descent");
    app.add_option("--kappa", d.kappa, "Step shrink factor")->capture_default_str()->group("Descent");
    app.add_option("--xi", d.xi, "Armijo control parameter")->capture_default_str()->group("Descent");
    app.add_option("--epsilon", d.epsilon, "Termination decrement (W)")->capture_default_str()->group("Descent");
    app.add_option("--fd-delta", rc.fd_delta, "Finite-difference step (m)")->default_str("wavelength*1e-5")->group("Descent");
    app.add_option("--i-max", d.i_max, "Maximum backtracking shrinks")->capture_default_str()->group("Descent");
}

inline std::vector<SchemeId> resolve_schemes(const std::vector<std::string>& names) {
    std::vector<SchemeId> out;
    for (const auto& n : names) {
        auto s = SchemeId::parse(n);
        if (!s) throw std::invalid_argument("unknown scheme: " + n);
        out.push_back(*s);
    }
    return out;
}

inline ProgressFn make_progress(const RunConfig& rc, std::ostream& err, const std::string& label) {
    if (rc.quiet) return {};
    return [&err, label](std::size_t done, std::size_t total) {
        if (done == total || done % 10 == 0) err << label << ": " << done << '/' << total << " trials\n";
    };
}

template <class Writer>
void emit(const RunConfig& rc, std::ostream& out, Writer&& write) {
    if (rc.out.empty()) {
        write(out);
    } else {
        write_file(rc.out, write);
    }
}

// Returns the process exit status.
inline int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                              std::ostream& err = std::cerr) {
    CLI::App app{"Movable-antenna multiuser uplink power minimization experiments", "mamac"};
    app.set_config("--config", "", "TOML/INI file with option defaults (flags override it)");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1, 1);
    app.fallthrough();

    RunConfig rc;
    add_common_options(app, rc);

    auto* convergence = app.add_subcommand("convergence", "Per-iteration total power of MA-ZF and MA-MMSE");
    auto* dump = app.add_subcommand("dump-scenario", "Write one sampled scenario as JSON");
    std::map<CLI::App*, const SweepCommand*> sweeps;
    for (const auto& c : sweep_commands()) sweeps[app.add_subcommand(c.name, c.help)] = &c;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream so, se;
        const int code = app.exit(e, so, se);
        out << so.str();
        err << se.str();
        return code;
    }

    try {
        rc.scenario.validate();
        rc.descent.fd_delta = rc.fd_delta.value_or(rc.scenario.wavelength * 1e-5);
        rc.descent.validate();

        if (convergence->parsed()) {
            const ConvergenceOutcome c = run_convergence(rc.scenario, rc.trials, rc.seed, rc.descent, rc.jobs,
                                                         make_progress(rc, err, "convergence"));
            if (c.trials == 0) throw std::runtime_error("no trial produced a feasible result");
            emit(rc, out, [&](std::ostream& os) { write_convergence_csv(os, c); });
            if (!rc.quiet && (c.failures > 0 || c.resamples > 0)) {
                err << "failures: " << c.failures << ", resampled draws: " << c.resamples << '\n';
            }
            return 0;
        }
        if (dump->parsed()) {
            std::uint64_t attempt = 0;
            int resamples = 0;
            const Scenario s = sample_trial_scenario(rc.scenario, rc.seed, 0, resamples, attempt);
            emit(rc, out, [&](std::ostream& os) { os << scenario_to_json(s).dump(2) << '\n'; });
            return 0;
        }
        for (const auto& [sub, cmd] : sweeps) {
            if (!sub->parsed()) continue;
            SweepSpec spec;
            spec.parameter = cmd->parameter;
            spec.values = rc.values.empty() ? cmd->default_values : rc.values;
            spec.base = rc.scenario;
            spec.trials = rc.trials;
            spec.schemes = resolve_schemes(rc.schemes.empty() ? cmd->default_schemes : rc.schemes);
            spec.seed = rc.seed;
            spec.options.mcp_uses_estimated_fri = rc.mcp_uses_estimated_fri;
            spec.validate();
            const SweepOutcome o = run_sweep(spec, rc.descent, rc.jobs, make_progress(rc, err, cmd->name));
            emit(rc, out, [&](std::ostream& os) { write_sweep_csv(os, o.rows, rc.log_average); });
            if (!rc.quiet && o.resamples > 0) err << "resampled draws: " << o.resamples << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

} // namespace mamac::cli
