// SPDX-License-Identifier: Apache-2.0
//
// Field-response channel model for single-antenna users with a movable
// antenna (MA) transmitting to a base station with a fixed planar array.
//
// A user's channel vector at MA position u is
//
//     h(u) = F^H * Sigma * g(u)
//
// where g(u) holds the phase of every transmit path relative to the user's
// local origin, F stacks the receive-path phases over the BS antennas and
// Sigma is the path-response matrix coupling transmit and receive paths.
#pragma once

#include "mamac/rng.hpp"
#include "mamac/types.hpp"

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mamac {

struct PathAngles {
    double elevation = 0.0; // [-pi/2, pi/2]
    double azimuth = 0.0;   // [-pi/2, pi/2]
};

// Direction cosines of a path. Unit norm when derived from PathAngles; an
// estimated (perturbed) set need not be.
struct VirtualAngles {
    double vtheta = 0.0;
    double vphi = 0.0;
    double vomega = 0.0;

    Vec3 as_vector() const { return {vtheta, vphi, vomega}; }
    bool operator==(const VirtualAngles&) const = default;
};

inline VirtualAngles virtual_angles(const PathAngles& a) {
    const double ce = std::cos(a.elevation);
    return {ce * std::cos(a.azimuth), ce * std::sin(a.azimuth), std::sin(a.elevation)};
}

// Axis-aligned moving region.
struct Box {
    Vec3 lower = Vec3::Zero();
    Vec3 upper = Vec3::Zero();

    static Box cube(double side) {
        const double h = side / 2.0;
        return {Vec3::Constant(-h), Vec3::Constant(h)};
    }

    bool contains(const Vec3& p) const {
        return (p.array() >= lower.array()).all() && (p.array() <= upper.array()).all();
    }
};

class ArrayGeometry {
public:
    ArrayGeometry(std::vector<Vec3> positions, int n1, int n2, double wavelength)
        : positions_(std::move(positions)), n1_(n1), n2_(n2), wavelength_(wavelength) {
        if (n1 < 1 || n2 < 1 || static_cast<std::size_t>(n1) * n2 != positions_.size()) {
            throw std::invalid_argument("ArrayGeometry: need n1 * n2 == number of positions >= 1");
        }
        if (!(wavelength > 0.0)) {
            throw std::invalid_argument("ArrayGeometry: wavelength must be positive");
        }
        for (const auto& p : positions_) {
            if (!p.allFinite()) {
                throw std::invalid_argument("ArrayGeometry: non-finite antenna position");
            }
        }
    }

    // n1 x n2 grid in the y-z plane centred on the BS origin; n1 runs along y
    // (horizontal), n2 along z (vertical).
    static ArrayGeometry planar(int n1, int n2, double wavelength, double spacing) {
        if (n1 < 1 || n2 < 1) {
            throw std::invalid_argument("ArrayGeometry: grid dimensions must be >= 1");
        }
        std::vector<Vec3> pos;
        pos.reserve(static_cast<std::size_t>(n1) * n2);
        for (int j = 0; j < n2; ++j) {
            for (int i = 0; i < n1; ++i) {
                pos.emplace_back(0.0, (i - (n1 - 1) / 2.0) * spacing, (j - (n2 - 1) / 2.0) * spacing);
            }
        }
        return ArrayGeometry(std::move(pos), n1, n2, wavelength);
    }

    static ArrayGeometry planar(int n1, int n2, double wavelength) {
        return planar(n1, n2, wavelength, wavelength / 2.0);
    }

    const std::vector<Vec3>& positions() const { return positions_; }
    int n1() const { return n1_; }
    int n2() const { return n2_; }
    int size() const { return static_cast<int>(positions_.size()); }
    double wavelength() const { return wavelength_; }

private:
    std::vector<Vec3> positions_;
    int n1_;
    int n2_;
    double wavelength_;
};

// Receive field-response matrix, lr x N. Column n is the receive FRV at BS
// antenna n.
inline CMatrix receive_frm(const std::vector<VirtualAngles>& rx, const ArrayGeometry& g) {
    const double k = kTwoPi / g.wavelength();
    const auto lr = static_cast<Eigen::Index>(rx.size());
    CMatrix f(lr, g.size());
    for (Eigen::Index n = 0; n < g.size(); ++n) {
        const Vec3& v = g.positions()[static_cast<std::size_t>(n)];
        for (Eigen::Index i = 0; i < lr; ++i) {
            f(i, n) = std::polar(1.0, k * v.dot(rx[static_cast<std::size_t>(i)].as_vector()));
        }
    }
    return f;
}

// One user's multipath description. Immutable once built; caches the receive
// FRM and the position-independent product F^H * Sigma.
class UserChannel {
public:
    UserChannel(std::vector<VirtualAngles> tx, std::vector<VirtualAngles> rx, CMatrix prm,
                const ArrayGeometry& array, double distance, Box region)
        : tx_(std::move(tx)), rx_(std::move(rx)), prm_(std::move(prm)), distance_(distance),
          region_(region), wavelength_(array.wavelength()) {
        if (tx_.empty() || rx_.empty()) {
            throw std::invalid_argument("UserChannel: path counts must be positive");
        }
        if (prm_.rows() != static_cast<Eigen::Index>(rx_.size()) ||
            prm_.cols() != static_cast<Eigen::Index>(tx_.size())) {
            throw std::invalid_argument("UserChannel: PRM must be lr x lt");
        }
        rx_frm_ = receive_frm(rx_, array);
        response_ = rx_frm_.adjoint() * prm_;
        tx_dirs_.resize(static_cast<Eigen::Index>(tx_.size()), 3);
        for (std::size_t j = 0; j < tx_.size(); ++j) {
            tx_dirs_.row(static_cast<Eigen::Index>(j)) = tx_[j].as_vector().transpose();
        }
    }

    int lt() const { return static_cast<int>(tx_.size()); }
    int lr() const { return static_cast<int>(rx_.size()); }
    const std::vector<VirtualAngles>& tx_virtual() const { return tx_; }
    const std::vector<VirtualAngles>& rx_virtual() const { return rx_; }
    const CMatrix& prm() const { return prm_; }
    const CMatrix& rx_frm() const { return rx_frm_; }
    // F^H * Sigma, N x lt.
    const CMatrix& response() const { return response_; }
    // lt x 3, row j = transmit virtual angles of path j.
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& tx_directions() const { return tx_dirs_; }
    double distance() const { return distance_; }
    const Box& region() const { return region_; }
    double wavelength() const { return wavelength_; }

private:
    std::vector<VirtualAngles> tx_;
    std::vector<VirtualAngles> rx_;
    CMatrix prm_;
    CMatrix rx_frm_;
    CMatrix response_;
    Eigen::Matrix<double, Eigen::Dynamic, 3> tx_dirs_;
    double distance_;
    Box region_;
    double wavelength_;
};

inline CMatrix receive_frm(const UserChannel& u, const ArrayGeometry& g) {
    return receive_frm(u.rx_virtual(), g);
}

// Transmit FRV at MA position pos; the position need not lie in the region.
inline CVector transmit_frv(const UserChannel& u, const Vec3& pos) {
    const double k = kTwoPi / u.wavelength();
    const RVector phase = k * (u.tx_directions() * pos);
    CVector g(phase.size());
    for (Eigen::Index j = 0; j < phase.size(); ++j) {
        g(j) = std::polar(1.0, phase(j));
    }
    return g;
}

inline CVector channel_vector(const UserChannel& u, const Vec3& pos) {
    return u.response() * transmit_frv(u, pos);
}

// Q = Sigma^H F F^H Sigma, so that ||h(u)||^2 = g(u)^H Q g(u).
inline CMatrix channel_power_quadratic(const UserChannel& u) {
    CMatrix q = u.response().adjoint() * u.response();
    // Exact Hermitian symmetry.
    const CMatrix qa = q.adjoint();
    q = (q + qa) * 0.5;
    return q;
}

enum class GainConvention {
    // c_k^2 = 10^(c0_db/10) * d^-alpha : the path-loss law acts on power.
    PowerLaw,
    // c_k^2 = (10^(c0_db/10) * d^-alpha)^2 : the law acts on amplitude.
    AmplitudeSquared,
};

struct ScenarioConfig {
    int n1 = 4;
    int n2 = 4;
    int users = 12;           // K
    int paths = 6;            // L, transmit and receive paths per user
    int aoa_pool = 20;        // S, shared receive-angle candidates
    double wavelength = 0.01; // m
    double c0_db = -40.0;
    double alpha = 2.8;
    double noise_dbm = -80.0;
    double region_wavelengths = 2.0; // J / lambda
    double rate = 3.0;               // bps/Hz, same for every user
    double distance_min = 20.0;      // m
    double distance_max = 100.0;     // m
    double spacing_wavelengths = 0.5;
    GainConvention gain = GainConvention::PowerLaw;

    int antennas() const { return n1 * n2; }

    void validate() const {
        auto fail = [](const std::string& m) { throw std::invalid_argument("ScenarioConfig: " + m); };
        if (n1 < 1 || n2 < 1) fail("array dimensions must be positive");
        if (users < 1) fail("number of users must be positive");
        if (users > antennas()) fail("K <= N required");
        if (paths < 1) fail("number of paths must be positive");
        if (aoa_pool < paths) fail("S >= L required");
        if (!(wavelength > 0.0)) fail("wavelength must be positive");
        if (!(alpha > 0.0)) fail("path-loss exponent must be positive");
        if (!(region_wavelengths > 0.0)) fail("region size must be positive");
        if (!(rate > 0.0)) fail("rate target must be positive");
        if (!(distance_min > 0.0) || distance_max < distance_min) fail("need 0 < distance_min <= distance_max");
        if (!(spacing_wavelengths > 0.0)) fail("antenna spacing must be positive");
        if (!std::isfinite(c0_db) || !std::isfinite(noise_dbm)) fail("gains must be finite");
    }

    // Expected total PRM power c_k^2 at distance d.
    double path_power(double d) const {
        const double c = db_to_linear(c0_db) * std::pow(d, -alpha);
        return gain == GainConvention::PowerLaw ? c : c * c;
    }
};

struct Scenario {
    ArrayGeometry array;
    std::vector<UserChannel> users;
    double noise_power;                // W
    std::vector<double> rate_targets;  // bps/Hz
    std::vector<double> snr_targets;   // 2^r - 1

    int user_count() const { return static_cast<int>(users.size()); }
    int antenna_count() const { return array.size(); }

    RVector eta() const { return Eigen::Map<const RVector>(snr_targets.data(), static_cast<Eigen::Index>(snr_targets.size())); }

    void validate() const {
        if (users.empty()) throw std::invalid_argument("Scenario: no users");
        if (user_count() > antenna_count()) throw std::invalid_argument("Scenario: K <= N required");
        if (!(noise_power > 0.0)) throw std::invalid_argument("Scenario: noise power must be positive");
        if (rate_targets.size() != users.size() || snr_targets.size() != users.size()) {
            throw std::invalid_argument("Scenario: one rate target per user required");
        }
        for (double e : snr_targets) {
            if (!(e > 0.0)) throw std::invalid_argument("Scenario: SINR targets must be positive");
        }
    }
};

inline Scenario make_scenario(ArrayGeometry array, std::vector<UserChannel> users, double noise_power,
                              std::vector<double> rates) {
    std::vector<double> eta(rates.size());
    for (std::size_t k = 0; k < rates.size(); ++k) eta[k] = std::exp2(rates[k]) - 1.0;
    Scenario s{std::move(array), std::move(users), noise_power, std::move(rates), std::move(eta)};
    s.validate();
    return s;
}

// Stacked MA positions: entries 3k..3k+2 hold user k.
inline CMatrix channel_matrix(const Scenario& s, const RVector& upos) {
    const int K = s.user_count();
    if (upos.size() != 3 * K) {
        throw std::invalid_argument("channel_matrix: position vector must have 3K entries");
    }
    CMatrix h(s.antenna_count(), K);
    for (int k = 0; k < K; ++k) {
        h.col(k) = channel_vector(s.users[static_cast<std::size_t>(k)], upos.segment<3>(3 * k));
    }
    return h;
}

namespace detail {

// Elevation with density cos(theta)/2 and uniform azimuth on [-pi/2, pi/2].
inline PathAngles sample_direction(Rng& rng) {
    const double el = std::asin(2.0 * rng.uniform() - 1.0);
    const double az = rng.uniform(-std::numbers::pi / 2.0, std::numbers::pi / 2.0);
    return {el, az};
}

} // namespace detail

// Random multipath scenario: uniform user distances, half-space-uniform AoDs,
// receive angles drawn without replacement from a pool of S angles shared by
// all users, and a diagonal PRM with CN(0, c_k^2 / L) entries.
inline Scenario sample_scenario(const ScenarioConfig& cfg, Rng& rng) {
    cfg.validate();
    ArrayGeometry array =
        ArrayGeometry::planar(cfg.n1, cfg.n2, cfg.wavelength, cfg.spacing_wavelengths * cfg.wavelength);
    const auto K = static_cast<std::size_t>(cfg.users);
    const auto L = static_cast<std::size_t>(cfg.paths);
    const auto S = static_cast<std::size_t>(cfg.aoa_pool);
    const Box region = Box::cube(cfg.region_wavelengths * cfg.wavelength);

    std::vector<double> distance(K);
    for (auto& d : distance) d = rng.uniform(cfg.distance_min, cfg.distance_max);

    std::vector<std::vector<VirtualAngles>> tx(K);
    std::vector<CMatrix> prm(K);
    for (std::size_t k = 0; k < K; ++k) {
        tx[k].reserve(L);
        for (std::size_t j = 0; j < L; ++j) tx[k].push_back(virtual_angles(detail::sample_direction(rng)));
        const double var = cfg.path_power(distance[k]) / static_cast<double>(L);
        prm[k] = CMatrix::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L));
        for (std::size_t j = 0; j < L; ++j) {
            prm[k](static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = rng.complex_normal(var);
        }
    }

    std::vector<VirtualAngles> pool;
    pool.reserve(S);
    for (std::size_t s = 0; s < S; ++s) pool.push_back(virtual_angles(detail::sample_direction(rng)));

    std::vector<UserChannel> users;
    users.reserve(K);
    std::vector<std::size_t> idx(S);
    for (std::size_t k = 0; k < K; ++k) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        // Partial Fisher-Yates: the first L entries form a uniform L-subset.
        for (std::size_t i = 0; i < L; ++i) {
            std::swap(idx[i], idx[i + rng.index(S - i)]);
        }
        std::vector<VirtualAngles> rx;
        rx.reserve(L);
        for (std::size_t i = 0; i < L; ++i) rx.push_back(pool[idx[i]]);
        users.emplace_back(std::move(tx[k]), std::move(rx), std::move(prm[k]), array, distance[k], region);
    }

    return make_scenario(std::move(array), std::move(users), dbm_to_watts(cfg.noise_dbm),
                         std::vector<double>(K, cfg.rate));
}

// Estimated scenario under imperfect field-response information. Each
// transmit virtual-angle component gets additive U[-mu/2, mu/2] error and
// each PRM entry becomes sigma / (1 + e) with e ~ CN(0, nu), which makes
// (sigma - sigma_hat) / |sigma_hat| ~ CN(0, nu). Receive angles are kept.
inline Scenario perturb_fri(const Scenario& s, double mu, double nu, Rng& rng) {
    if (!(mu >= 0.0) || !(nu >= 0.0)) {
        throw std::invalid_argument("perturb_fri: error levels must be non-negative");
    }
    std::vector<UserChannel> users;
    users.reserve(s.users.size());
    for (const auto& u : s.users) {
        std::vector<VirtualAngles> tx = u.tx_virtual();
        for (auto& a : tx) {
            a.vtheta += mu * (rng.uniform() - 0.5);
            a.vphi += mu * (rng.uniform() - 0.5);
            a.vomega += mu * (rng.uniform() - 0.5);
        }
        CMatrix prm = u.prm();
        for (Eigen::Index j = 0; j < prm.cols(); ++j) {
            for (Eigen::Index i = 0; i < prm.rows(); ++i) {
                if (prm(i, j) == Complex(0.0, 0.0)) continue;
                prm(i, j) /= (1.0 + rng.complex_normal(nu));
            }
        }
        users.emplace_back(std::move(tx), u.rx_virtual(), std::move(prm), s.array, u.distance(), u.region());
    }
    return Scenario{s.array, std::move(users), s.noise_power, s.rate_targets, s.snr_targets};
}

} // namespace mamac
