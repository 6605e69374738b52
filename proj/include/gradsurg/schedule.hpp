#pragma once

#include <cmath>
#include <string>

#include "gradsurg/vec.hpp"

namespace gradsurg {

/// Step-size / tolerance schedule: either a constant c or the power decay
/// c * (t+1)^(-p). Values are strictly positive (or zero for constant-0
/// tolerances) and non-increasing in t.
struct Schedule {
    enum class Kind { constant, power_decay };

    Kind kind = Kind::constant;
    double base = 0.0;      // c
    double exponent = 0.0;  // p, only used for power_decay

    static Schedule constant(double c) {
        Schedule s;
        s.kind = Kind::constant;
        s.base = c;
        return s;
    }

    static Schedule power(double c, double p) {
        Schedule s;
        s.kind = Kind::power_decay;
        s.base = c;
        s.exponent = p;
        return s;
    }

    double value(long t) const {
        if (kind == Kind::constant) return base;
        return base * std::pow(static_cast<double>(t) + 1.0, -exponent);
    }

    double operator()(long t) const { return value(t); }

    /// Schedules for step sizes must be positive; tolerances may be zero.
    void validate(const std::string& name, bool allow_zero) const {
        if (!std::isfinite(base)) throw ConfigError(name + ": base not finite");
        if (allow_zero ? base < 0.0 : base <= 0.0)
            throw ConfigError(name + ": base must be " +
                              (allow_zero ? "non-negative" : "positive"));
        if (exponent < 0.0) throw ConfigError(name + ": exponent must be >= 0");
    }

    bool operator==(const Schedule&) const = default;
};

}  // namespace gradsurg
