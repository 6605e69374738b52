#pragma once

#include <algorithm>

#include "gradsurg/vec.hpp"

namespace gradsurg {

// Two-objective specializations of the standard multi-task combination
// rules, used as comparison solvers. All are deterministic closed forms.

/// Linear scalarization: d = g_e + lambda * g_p with a fixed weight.
inline Vec linear_direction(const GradientPair& g, double lambda_fixed) {
    if (lambda_fixed < 0.0) throw ConfigError("linear weight must be >= 0");
    return g.e + lambda_fixed * g.p;
}

/// Project-conflicting-gradients: when the gradients conflict, each one is
/// projected onto the normal plane of the other and the projections are
/// summed; otherwise the plain sum is used. Both projections are computed
/// from the raw inputs (no task ordering), so the rule is deterministic.
inline Vec pcgrad_direction(const GradientPair& g) {
    const double dot = g.e.dot(g.p);
    if (dot >= 0.0) return g.e + g.p;
    const double pp = g.p.squaredNorm();
    const double ee = g.e.squaredNorm();
    Vec e_proj = g.e;
    Vec p_proj = g.p;
    if (pp > 0.0) e_proj -= (dot / pp) * g.p;
    if (ee > 0.0) p_proj -= (dot / ee) * g.e;
    return e_proj + p_proj;
}

/// Weight of g_e in the two-task min-norm combination, clipped to [0, 1].
inline double mgda_gamma(const GradientPair& g) {
    const Vec diff = g.e - g.p;
    const double denom = diff.squaredNorm();
    if (denom == 0.0) return 1.0;  // identical gradients
    return std::clamp((g.p - g.e).dot(g.p) / denom, 0.0, 1.0);
}

/// Minimum-norm point in the convex hull {gamma g_e + (1-gamma) g_p}.
inline Vec mgda_direction(const GradientPair& g) {
    const double gamma = mgda_gamma(g);
    return gamma * g.e + (1.0 - gamma) * g.p;
}

}  // namespace gradsurg
