#pragma once

#include <cmath>
#include <functional>

#include "gradsurg/vec.hpp"

namespace gradsurg {

/// Central-difference gradient with per-coordinate relative stepping
/// h_i = h * (1 + |x_i|). Used as the independent oracle for every
/// analytic gradient in the library; never on a hot path.
inline Vec finite_difference_gradient(const std::function<double(const Vec&)>& f,
                                      const Vec& x, double h = 1e-6) {
    if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
    Vec g(x.size());
    Vec probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double hi = h * (1.0 + std::abs(x[i]));
        probe[i] = x[i] + hi;
        const double fp = f(probe);
        probe[i] = x[i] - hi;
        const double fm = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("objective non-finite at finite-difference probe");
        g[i] = (fp - fm) / (2.0 * hi);
    }
    return g;
}

/// Relative error between an analytic and a numeric gradient, guarded
/// against near-zero denominators.
inline double gradient_relative_error(const Vec& analytic, const Vec& numeric) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

}  // namespace gradsurg
