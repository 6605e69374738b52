#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "gradsurg/baselines.hpp"
#include "gradsurg/objective.hpp"
#include "gradsurg/surgery.hpp"
#include "gradsurg/trace.hpp"

namespace gradsurg {

enum class SolverKind { explicit_surgery, implicit_surgery, linear, pcgrad, mgda };

enum class Instrumentation {
    light,  // trace columns only, nothing beyond what the solver computes
    full    // per-step gradient pairs and stationarity, via uncounted probes
};

inline std::string to_string(SolverKind k) {
    switch (k) {
        case SolverKind::explicit_surgery: return "explicit";
        case SolverKind::implicit_surgery: return "implicit";
        case SolverKind::linear: return "linear";
        case SolverKind::pcgrad: return "pcgrad";
        case SolverKind::mgda: return "mgda";
    }
    return "?";
}

/// Pareto stationarity of a gradient pair: the norm of the minimum-norm
/// point in the convex hull of the two gradients (coincides with the
/// two-task min-norm combination).
inline double stationarity_measure(const GradientPair& g) {
    return mgda_direction(g).norm();
}

struct SolverSettings {
    SolverKind kind = SolverKind::implicit_surgery;
    SurgeryConfig surgery;          // schedules and dual-state options
    double lambda_fixed = 0.1;      // linear scalarization weight
    Instrumentation instrumentation = Instrumentation::light;
};

namespace detail {

inline void record_instrumentation(TraceRow& row, IterateTrace& trace,
                                   const GradientPair& g, bool keep_grads) {
    row.grad_norm_e = g.e.norm();
    row.grad_norm_p = g.p.norm();
    row.stationarity = stationarity_measure(g);
    if (keep_grads) trace.gradients.push_back(g);
}

inline double realized_drift(const IterateTrace& trace, double loss_p_curr,
                             double prev_alpha, double epsilon) {
    if (trace.rows.empty()) return epsilon;
    return drift_estimate(trace.rows.back().loss_p, loss_p_curr, prev_alpha,
                          epsilon);
}

}  // namespace detail

/// Run one solver for config.max_steps steps from theta0. Aborts on
/// non-finite losses or parameters, returning the partial trace and the
/// failing step. Deterministic: same settings, objective, and start point
/// give a bit-identical outcome.
inline RunOutcome run_solver(const SolverSettings& settings, ObjectivePair& obj,
                             Vec theta) {
    const SurgeryConfig& cfg = settings.surgery;
    cfg.validate();
    if (settings.kind == SolverKind::linear && settings.lambda_fixed < 0.0)
        throw ConfigError("linear solver weight must be >= 0");

    RunOutcome out;
    IterateTrace& trace = out.trace;
    trace.rows.reserve(static_cast<std::size_t>(cfg.max_steps));
    const bool full = settings.instrumentation == Instrumentation::full;

    SurgeryState state;
    state.lambda = cfg.lambda_init;

    try {
        require_finite(theta, "initial parameters");
        for (long t = 0; t < cfg.max_steps; ++t) {
            const double alpha = cfg.alpha(t);
            const double epsilon = cfg.epsilon(t);

            TraceRow row;
            row.step = t;
            Vec direction;

            switch (settings.kind) {
                case SolverKind::explicit_surgery: {
                    // two backward passes: one per objective
                    ValueGrad e = obj.grad_e(theta);
                    ValueGrad p = obj.grad_p(theta);
                    GradientPair g(e.grad, p.grad);
                    double lambda_star = 0.0;
                    if (g.p.squaredNorm() > 0.0)
                        lambda_star = closed_form_lambda(g, epsilon);
                    direction = explicit_direction(g, epsilon);
                    row.loss_e = e.value;
                    row.loss_p = p.value;
                    row.lambda = std::max(0.0, lambda_star);
                    row.delta = detail::realized_drift(trace, p.value,
                                                       state.prev_alpha, epsilon);
                    detail::record_instrumentation(row, trace, g, full);
                    break;
                }
                case SolverKind::implicit_surgery: {
                    const double beta = cfg.beta(t);
                    double lambda_used;
                    double delta;
                    if (!cfg.lookahead) {
                        // Trailing drift: one loss-only evaluation at the
                        // current iterate closes the (t-1, t) difference,
                        // then the freshly updated lambda drives the single
                        // backward pass.
                        if (state.prev_loss_p.has_value()) {
                            const double lp_here = obj.loss_p(theta);
                            delta = drift_estimate(*state.prev_loss_p, lp_here,
                                                   state.prev_alpha, epsilon);
                        } else {
                            delta = epsilon;  // first step: no drift observed yet
                        }
                        if (beta > 0.0)
                            state.lambda = implicit_lambda_update(
                                state.lambda, delta, beta, cfg.lambda_clamp);
                        lambda_used = state.lambda;
                    } else {
                        // Look-ahead: lambda was already refreshed from the
                        // drift measured right after the previous step.
                        lambda_used = state.lambda;
                        delta = 0.0;  // filled in below once the step lands
                    }

                    CompositeEval ce = obj.grad_composite(theta, lambda_used);
                    if (!std::isfinite(ce.loss_e) || !std::isfinite(ce.loss_p))
                        throw NumericError("composite loss non-finite at step " +
                                           std::to_string(t));
                    direction = ce.grad;
                    row.loss_e = ce.loss_e;
                    row.loss_p = ce.loss_p;
                    row.lambda = lambda_used;

                    if (cfg.lookahead) {
                        Vec ahead = theta - alpha * direction;
                        require_finite(ahead, "look-ahead parameters");
                        const double lp_next = obj.loss_p(ahead);
                        delta = drift_estimate(ce.loss_p, lp_next, alpha, epsilon);
                        if (beta > 0.0)
                            state.lambda = implicit_lambda_update(
                                state.lambda, delta, beta, cfg.lambda_clamp);
                    }
                    row.delta = delta;
                    state.prev_loss_p = ce.loss_p;

                    if (full) {
                        GradientPair g(obj.raw().gradient_e(theta),
                                       obj.raw().gradient_p(theta));
                        detail::record_instrumentation(row, trace, g, true);
                    }
                    break;
                }
                case SolverKind::linear:
                case SolverKind::pcgrad:
                case SolverKind::mgda: {
                    ValueGrad e = obj.grad_e(theta);
                    ValueGrad p = obj.grad_p(theta);
                    GradientPair g(e.grad, p.grad);
                    if (settings.kind == SolverKind::linear) {
                        direction = linear_direction(g, settings.lambda_fixed);
                        row.lambda = settings.lambda_fixed;
                    } else if (settings.kind == SolverKind::pcgrad) {
                        direction = pcgrad_direction(g);
                        row.lambda = 0.0;
                    } else {
                        direction = mgda_direction(g);
                        row.lambda = 0.0;
                    }
                    row.loss_e = e.value;
                    row.loss_p = p.value;
                    row.delta = detail::realized_drift(trace, p.value,
                                                       state.prev_alpha, epsilon);
                    detail::record_instrumentation(row, trace, g, full);
                    break;
                }
            }

            require_finite(direction, "update direction at step " + std::to_string(t));
            row.dir_norm = direction.norm();
            if (!std::isfinite(row.loss_e) || !std::isfinite(row.loss_p))
                throw NumericError("loss non-finite at step " + std::to_string(t));

            theta -= alpha * direction;
            require_finite(theta, "parameters after step " + std::to_string(t));

            state.prev_alpha = alpha;
            state.step = t + 1;
            trace.rows.push_back(row);
        }

        // final losses are diagnostics, evaluated outside the counted budget
        trace.final_loss_e = obj.raw().value_e(theta);
        trace.final_loss_p = obj.raw().value_p(theta);
    } catch (const Error& err) {
        out.failure = RunFailure{state.step, err.what()};
    }

    trace.counts = obj.counts();
    out.final_params = std::move(theta);
    return out;
}

}  // namespace gradsurg
