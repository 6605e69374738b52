#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace gradsurg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration (schedules, dimensions, file schemas).
struct ConfigError : Error {
    using Error::Error;
};

/// A computed quantity became NaN/Inf. Runs abort with a diagnostic instead
/// of letting non-finite values propagate.
struct NumericError : Error {
    using Error::Error;
};

/// The preservation gradient vanished where a caller required it nonzero.
struct DegeneratePreservationError : Error {
    using Error::Error;
};

/// A numeric oracle failed to converge within its iteration cap.
struct OracleError : Error {
    using Error::Error;
};

inline bool all_finite(const Vec& v) {
    return v.allFinite();
}

inline void require_finite(const Vec& v, const std::string& what) {
    if (!v.allFinite()) throw NumericError("non-finite values in " + what);
}

inline void require_finite(double x, const std::string& what) {
    if (!std::isfinite(x)) throw NumericError("non-finite value in " + what);
}

/// Gradients of both objectives at a common point. Same dimension as the
/// parameter vector they were taken at.
struct GradientPair {
    Vec e;  // erasure gradient
    Vec p;  // preservation gradient

    GradientPair() = default;
    GradientPair(Vec ge, Vec gp) : e(std::move(ge)), p(std::move(gp)) {
        if (e.size() != p.size())
            throw ConfigError("gradient pair dimensions differ");
        require_finite(e, "erasure gradient");
        require_finite(p, "preservation gradient");
    }
};

}  // namespace gradsurg
