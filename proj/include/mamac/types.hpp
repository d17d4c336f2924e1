// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mamac {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Thrown when a multiple-access matrix is not of full column rank at the
// configured conditioning threshold.
class RankDeficientError : public std::runtime_error {
public:
    RankDeficientError(const std::string& what, double conditioning)
        : std::runtime_error(what), conditioning_(conditioning) {}

    // sigma_min / sigma_max of the offending matrix.
    double conditioning() const noexcept { return conditioning_; }

private:
    double conditioning_;
};

class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double watts_to_dbm(double watts) { return 10.0 * std::log10(watts * 1000.0); }
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

} // namespace mamac
