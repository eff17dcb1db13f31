#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace risvi {

using cxd = std::complex<double>;

// Dense complex/real containers used across all modules. Values are treated
// as immutable once handed to an operation; every function returns by value.
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Failure taxonomy. The CLI maps these onto exit codes: config/contract
// problems -> 2, missing artifacts -> 3, numerical breakdown -> 4.
struct dimension_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct contract_error : std::logic_error {
    using std::logic_error::logic_error;
};

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct missing_artifact_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct training_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

inline void require(bool cond, const std::string& what) {
    if (!cond) throw contract_error(what);
}

inline void require_dim(bool cond, const std::string& what) {
    if (!cond) throw dimension_error(what);
}

// Wrap an angle into [0, 2*pi).
inline double wrap_angle(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    if (t >= kTwoPi) t = 0.0;
    return t;
}

}  // namespace risvi
