#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "gradsurg/schedule.hpp"
#include "gradsurg/vec.hpp"

namespace gradsurg {

// Unilateral gradient surgery for a two-objective problem: pick the update
// direction d that maximizes erasure progress g_e . d - ||d||^2 / 2 subject
// to the preservation constraint g_p . d >= -epsilon. The dual of that QP is
// a scalar quadratic in the multiplier lambda, so the solution is closed
// form; the implicit variant instead tracks lambda from observed
// preservation-loss drift at the cost of a single backward pass per step.

/// Dual objective L(lambda) = ||g_e + lambda g_p||^2 / 2 + lambda * epsilon.
inline double dual_objective(double lambda, const GradientPair& g, double epsilon) {
    return 0.5 * (g.e + lambda * g.p).squaredNorm() + lambda * epsilon;
}

/// Unconstrained minimizer of the dual,
/// lambda* = (-g_p . g_e - epsilon) / ||g_p||^2.
/// The sign selects the branch downstream: surgery applies only when
/// lambda* > 0. Throws if the preservation gradient vanishes; callers that
/// can treat that case as non-conflicting should check first.
inline double closed_form_lambda(const GradientPair& g, double epsilon) {
    const double pp = g.p.squaredNorm();
    if (pp == 0.0)
        throw DegeneratePreservationError(
            "preservation gradient is zero; dual multiplier undefined");
    return (-g.p.dot(g.e) - epsilon) / pp;
}

/// Optimal surgered direction:
///   d* = g_e + lambda* g_p   if lambda* > 0 (constraint active)
///   d* = g_e                 otherwise.
/// A zero preservation gradient makes the constraint vacuous, so the
/// direction is g_e unchanged. When lambda* > 0, g_p . d* == -epsilon up to
/// round-off.
inline Vec explicit_direction(const GradientPair& g, double epsilon) {
    if (g.p.squaredNorm() == 0.0) return g.e;
    const double lambda = closed_form_lambda(g, epsilon);
    if (lambda > 0.0) return g.e + lambda * g.p;
    return g.e;
}

/// Surgery is needed exactly when the conflict exceeds the tolerance cone,
/// i.e. g_p . g_e < -epsilon.
inline bool surgery_active(const GradientPair& g, double epsilon) {
    return g.p.dot(g.e) < -epsilon;
}

/// Drift estimate delta = (L_p(prev) - L_p(curr)) / alpha + epsilon.
/// Negative drift means preservation got worse faster than the tolerance
/// allows, which pushes the dual variable up.
inline double drift_estimate(double loss_p_prev, double loss_p_curr,
                             double alpha, double epsilon) {
    if (!(alpha > 0.0)) throw ConfigError("drift estimate requires alpha > 0");
    return (loss_p_prev - loss_p_curr) / alpha + epsilon;
}

/// Dual ascent step lambda' = max(0, lambda - beta * delta).
inline double implicit_lambda_update(double lambda, double delta, double beta,
                                     bool clamp = true) {
    if (!(beta > 0.0)) throw ConfigError("dual step size beta must be > 0");
    const double next = lambda - beta * delta;
    return clamp ? std::max(0.0, next) : next;
}

/// Hyperparameters shared by the explicit and implicit solvers.
struct SurgeryConfig {
    Schedule alpha = Schedule::constant(1e-3);   // model step size
    Schedule beta = Schedule::constant(0.1);     // dual step size
    Schedule epsilon = Schedule::constant(0.01); // per-step tolerance
    long max_steps = 1000;
    double lambda_init = 0.0;
    bool lambda_clamp = true;
    bool lookahead = false;  // measure drift on the step just taken instead
                             // of the trailing one (costs one loss-only call
                             // at the new iterate)

    void validate() const {
        alpha.validate("alpha", false);
        beta.validate("beta", true);  // beta = 0 freezes the dual variable
        epsilon.validate("epsilon", true);
        if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
        if (lambda_init < 0.0) throw ConfigError("lambda_init must be >= 0");
    }
};

/// Mutable dual state carried across implicit steps.
struct SurgeryState {
    double lambda = 0.0;
    std::optional<double> prev_loss_p;  // L_p at the previous iterate
    double prev_alpha = 0.0;            // step size that produced the move
    long step = 0;
};

}  // namespace gradsurg
