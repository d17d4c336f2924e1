// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mamac/channel.hpp"
#include "mamac/experiments.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace mamac {

// 17 significant digits, locale independent; parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline constexpr const char* kSweepHeader =
    "sweep_param,sweep_value,scheme,trials,failures,mean_power_dbm,mean_power_w";

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool with_log_average = false) {
    if (rows.empty()) throw std::invalid_argument("write_sweep_csv: empty table");
    os << kSweepHeader;
    if (with_log_average) os << ",mean_of_dbm";
    os << '\n';
    for (const auto& r : rows) {
        os << r.parameter << ',' << format_double(r.value) << ',' << r.scheme.name() << ',' << r.stats.count << ','
           << r.stats.failures << ',' << format_double(r.stats.mean_dbm) << ',' << format_double(r.stats.mean_w);
        if (with_log_average) os << ',' << format_double(r.stats.mean_of_dbm);
        os << '\n';
    }
}

inline constexpr const char* kConvergenceHeader =
    "iteration,trials,ma_zf_mean_power_w,ma_zf_mean_power_dbm,ma_mmse_mean_power_w,ma_mmse_mean_power_dbm,"
    "mmse_signal_norm_db,mmse_interference_norm_db";

inline void write_convergence_csv(std::ostream& os, const ConvergenceOutcome& c) {
    if (c.rows.empty()) throw std::invalid_argument("write_convergence_csv: empty table");
    os << kConvergenceHeader << '\n';
    for (const auto& r : c.rows) {
        os << r.iteration << ',' << c.trials << ',' << format_double(r.zf_mean_w) << ','
           << format_double(watts_to_dbm(r.zf_mean_w)) << ',' << format_double(r.mmse_mean_w) << ','
           << format_double(watts_to_dbm(r.mmse_mean_w)) << ',' << format_double(linear_to_db(r.signal_norm)) << ','
           << format_double(linear_to_db(r.interference_norm)) << '\n';
    }
}

// Writes via `write` into `path`, throwing std::runtime_error on I/O failure.
template <class Writer>
void write_file(const std::string& path, Writer&& write) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    write(f);
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + path);
}

// Scenario dump for debugging and replay. Doubles are serialized with
// round-trip precision.
namespace detail {

inline nlohmann::json angles_json(const std::vector<VirtualAngles>& v) {
    auto a = nlohmann::json::array();
    for (const auto& x : v) a.push_back({x.vtheta, x.vphi, x.vomega});
    return a;
}

inline std::vector<VirtualAngles> angles_from(const nlohmann::json& a) {
    std::vector<VirtualAngles> out;
    for (const auto& x : a) out.push_back({x.at(0).get<double>(), x.at(1).get<double>(), x.at(2).get<double>()});
    return out;
}

} // namespace detail

inline nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json j;
    j["array"]["n1"] = s.array.n1();
    j["array"]["n2"] = s.array.n2();
    j["array"]["wavelength"] = s.array.wavelength();
    auto pos = nlohmann::json::array();
    for (const auto& p : s.array.positions()) pos.push_back({p.x(), p.y(), p.z()});
    j["array"]["positions"] = pos;
    j["noise_power"] = s.noise_power;
    j["rate_targets"] = s.rate_targets;
    auto users = nlohmann::json::array();
    for (const auto& u : s.users) {
        nlohmann::json ju;
        ju["distance"] = u.distance();
        ju["region"]["lower"] = {u.region().lower.x(), u.region().lower.y(), u.region().lower.z()};
        ju["region"]["upper"] = {u.region().upper.x(), u.region().upper.y(), u.region().upper.z()};
        ju["tx"] = detail::angles_json(u.tx_virtual());
        ju["rx"] = detail::angles_json(u.rx_virtual());
        auto prm = nlohmann::json::array();
        for (Eigen::Index i = 0; i < u.prm().rows(); ++i) {
            auto row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < u.prm().cols(); ++c) row.push_back({u.prm()(i, c).real(), u.prm()(i, c).imag()});
            prm.push_back(row);
        }
        ju["prm"] = prm;
        users.push_back(ju);
    }
    j["users"] = users;
    return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    std::vector<Vec3> pos;
    for (const auto& p : j.at("array").at("positions")) {
        pos.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    }
    ArrayGeometry array(std::move(pos), j.at("array").at("n1").get<int>(), j.at("array").at("n2").get<int>(),
                        j.at("array").at("wavelength").get<double>());
    std::vector<UserChannel> users;
    for (const auto& ju : j.at("users")) {
        const auto& lo = ju.at("region").at("lower");
        const auto& hi = ju.at("region").at("upper");
        Box region{{lo.at(0).get<double>(), lo.at(1).get<double>(), lo.at(2).get<double>()},
                   {hi.at(0).get<double>(), hi.at(1).get<double>(), hi.at(2).get<double>()}};
        const auto& jp = ju.at("prm");
        CMatrix prm(static_cast<Eigen::Index>(jp.size()), static_cast<Eigen::Index>(jp.at(0).size()));
        for (Eigen::Index i = 0; i < prm.rows(); ++i) {
            for (Eigen::Index c = 0; c < prm.cols(); ++c) {
                const auto& e = jp.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c));
                prm(i, c) = {e.at(0).get<double>(), e.at(1).get<double>()};
            }
        }
        users.emplace_back(detail::angles_from(ju.at("tx")), detail::angles_from(ju.at("rx")), std::move(prm), array,
                           ju.at("distance").get<double>(), region);
    }
    return make_scenario(std::move(array), std::move(users), j.at("noise_power").get<double>(),
                         j.at("rate_targets").get<std::vector<double>>());
}

} // namespace mamac
