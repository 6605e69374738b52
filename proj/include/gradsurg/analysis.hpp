#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gradsurg/objective.hpp"
#include "gradsurg/rng.hpp"
#include "gradsurg/schedule.hpp"
#include "gradsurg/solver.hpp"
#include "gradsurg/surgery.hpp"
#include "gradsurg/trace.hpp"
#include "gradsurg/vec.hpp"

namespace gradsurg::analysis {

// Independent numeric oracles plus the empirical checks for the solver's
// convergence and utility-preservation guarantees. Everything here is a
// pure function of recorded traces and probe evaluations; nothing feeds
// back into a solver's hot path.

/// Primal/dual solution found by numeric optimization only (projected
/// gradient ascent on the direction, bracketed golden-section on the dual).
struct QpSolution {
    Vec direction;
    double lambda = 0.0;
};

/// Golden-section minimizer of the scalar dual over lambda >= 0.
/// Expands the bracket until the convex dual turns upward, so it does not
/// depend on the closed-form solution in any way.
inline double dual_search_lambda(const GradientPair& g, double epsilon,
                                 double tol = 1e-12) {
    auto f = [&](double l) { return dual_objective(l, g, epsilon); };
    double lo = 0.0, hi = 1.0;
    while (f(hi) < f(0.75 * hi) && hi < 1e12) hi *= 4.0;
    if (hi >= 1e12) throw OracleError("dual bracket expansion failed");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol * (1.0 + b)) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// Solve max_d g_e . d - ||d||^2/2 subject to g_p . d >= -epsilon by
/// projected gradient ascent to the requested stationarity. The objective
/// is 1-strongly concave, so unit steps converge linearly.
inline QpSolution qp_oracle(const GradientPair& g, double epsilon,
                            double stat_tol = 1e-10, int max_iters = 100000) {
    const double pp = g.p.squaredNorm();
    auto project = [&](Vec d) {
        if (pp == 0.0) return d;
        const double slack = g.p.dot(d) + epsilon;
        if (slack < 0.0) d -= (slack / pp) * g.p;
        return d;
    };
    Vec d = Vec::Zero(g.e.size());
    for (int it = 0; it < max_iters; ++it) {
        Vec next = project(d + 0.5 * (g.e - d));  // ascent step below 1/L
        const double move = (next - d).norm();
        d = next;
        if (move <= stat_tol * (1.0 + d.norm())) {
            QpSolution sol;
            sol.direction = std::move(d);
            sol.lambda = dual_search_lambda(g, epsilon);
            return sol;
        }
    }
    throw OracleError("qp oracle did not converge");
}

/// Grid minimizer of the dual over [0, hi], used to cross-check the
/// bracketed search on small cases.
inline double dual_grid_lambda(const GradientPair& g, double epsilon,
                               double hi = 10.0, double step = 1e-4) {
    double best_l = 0.0;
    double best_v = dual_objective(0.0, g, epsilon);
    for (double l = step; l <= hi; l += step) {
        const double v = dual_objective(l, g, epsilon);
        if (v < best_v) {
            best_v = v;
            best_l = l;
        }
    }
    return best_l;
}

/// Least-squares slope of log(y) against log(x) over the index window
/// [first, last]. Non-positive y values are skipped.
inline double loglog_slope(const std::vector<double>& xs,
                           const std::vector<double>& ys, std::size_t first,
                           std::size_t last) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = first; i <= last && i < xs.size(); ++i) {
        if (!(ys[i] > 0.0) || !(xs[i] > 0.0)) continue;
        const double lx = std::log(xs[i]);
        const double ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return 0.0;
    const double denom = sxx - sx * sx / static_cast<double>(n);
    if (denom == 0.0) return 0.0;
    return (sxy - sx * sy / static_cast<double>(n)) / denom;
}

inline std::vector<double> running_average(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        acc += v[i];
        out[i] = acc / static_cast<double>(i + 1);
    }
    return out;
}

inline std::vector<double> running_min(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i) {
        m = std::min(m, v[i]);
        out[i] = m;
    }
    return out;
}

/// Empirically fitted problem constants used by the bound checks.
struct AnalysisConfig {
    double smoothness = 0.0;   // G: max ||grad f(x) - grad f(y)|| / ||x - y||
    double lipschitz = 0.0;    // L: max |f(x) - f(y)| / ||x - y||
    double slack_multiplier = 2.0;
};

/// Fit G and L by sampling point pairs in a box of the given radius around
/// a reference point.
inline AnalysisConfig fit_constants(const TwoObjective& fn, const Vec& around,
                                    double radius, int pairs, Rng& rng) {
    AnalysisConfig cfg;
    for (int i = 0; i < pairs; ++i) {
        Vec a = around + rng.normal_vec(fn.dim(), radius);
        Vec b = around + rng.normal_vec(fn.dim(), radius);
        const double dist = (a - b).norm();
        if (dist < 1e-12) continue;
        cfg.smoothness = std::max(
            cfg.smoothness,
            std::max((fn.gradient_e(a) - fn.gradient_e(b)).norm(),
                     (fn.gradient_p(a) - fn.gradient_p(b)).norm()) /
                dist);
        cfg.lipschitz = std::max(
            cfg.lipschitz,
            std::max(std::abs(fn.value_e(a) - fn.value_e(b)),
                     std::abs(fn.value_p(a) - fn.value_p(b))) /
                dist);
    }
    if (cfg.smoothness <= 0.0 || cfg.lipschitz <= 0.0)
        throw OracleError("constant fitting produced degenerate estimates");
    return cfg;
}

/// Outcome of one empirical check.
struct CheckResult {
    std::string name;
    bool passed = false;
    bool skipped = false;
    double statistic = 0.0;  // the measured quantity
    double bound = 0.0;      // what it was compared against
    std::string detail;
};

/// Report over a family of checks.
struct TheoremReport {
    std::vector<CheckResult> checks;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed && !c.skipped) return false;
        return true;
    }
    void add(CheckResult c) { checks.push_back(std::move(c)); }
};

/// Cumulative utility-degradation bound: for every step t,
///   L_p(x_t) - L_p(x_0) <= c * sum_{i<t} alpha_i eps_i
///                          + (G/2) * sum_{i<t} alpha_i^2 ||d_i||^2.
inline CheckResult utility_bound_check(const IterateTrace& trace,
                                       const Schedule& alpha,
                                       const Schedule& epsilon, double smoothness,
                                       double slack_multiplier) {
    CheckResult res;
    res.name = "utility-bound";
    if (trace.rows.empty()) {
        res.detail = "empty trace";
        return res;
    }
    const double base = trace.rows.front().loss_p;
    double tol_sum = 0.0;
    double second_order = 0.0;
    double worst_excess = -std::numeric_limits<double>::infinity();
    double worst_deg = -std::numeric_limits<double>::infinity();
    bool ok = true;
    auto consider = [&](double loss_p) {
        const double degradation = loss_p - base;
        const double bound = slack_multiplier * tol_sum +
                             0.5 * smoothness * second_order + 1e-12;
        worst_deg = std::max(worst_deg, degradation);
        worst_excess = std::max(worst_excess, degradation - bound);
        if (degradation > bound) ok = false;
    };
    for (std::size_t t = 1; t < trace.rows.size(); ++t) {
        const TraceRow& prev = trace.rows[t - 1];
        const double a = alpha(prev.step);
        tol_sum += a * epsilon(prev.step);
        second_order += a * a * prev.dir_norm * prev.dir_norm;
        consider(trace.rows[t].loss_p);
    }
    {
        const TraceRow& last = trace.rows.back();
        const double a = alpha(last.step);
        tol_sum += a * epsilon(last.step);
        second_order += a * a * last.dir_norm * last.dir_norm;
        consider(trace.final_loss_p);
    }
    res.passed = ok;
    res.statistic = worst_deg;
    res.bound = worst_deg - worst_excess;
    res.detail = "max degradation " + std::to_string(worst_deg) +
                 ", max excess over bound " + std::to_string(worst_excess);
    return res;
}

/// Per-step dual gaps L_t(lambda_t) - L_t(lambda_t*) from an instrumented
/// trace. Requires per-step gradient pairs.
inline std::vector<double> dual_gap_series(const IterateTrace& trace,
                                           const Schedule& epsilon) {
    if (!trace.instrumented())
        throw ConfigError("dual gap series requires full instrumentation");
    std::vector<double> gaps;
    gaps.reserve(trace.rows.size());
    for (std::size_t i = 0; i < trace.rows.size(); ++i) {
        const GradientPair& g = trace.gradients[i];
        const double eps = epsilon(trace.rows[i].step);
        double lambda_opt = 0.0;
        if (g.p.squaredNorm() > 0.0)
            lambda_opt = std::max(0.0, closed_form_lambda(g, eps));
        const double gap = dual_objective(trace.rows[i].lambda, g, eps) -
                           dual_objective(lambda_opt, g, eps);
        gaps.push_back(std::max(0.0, gap));
    }
    return gaps;
}

/// Average dual gap must shrink between the two probe steps and its
/// running average must decay with a log-log slope at or below the
/// threshold (theoretical rate is t^(-1/3); faster decay passes).
inline CheckResult dual_gap_check(const IterateTrace& trace,
                                  const Schedule& epsilon, long early = 100,
                                  long late = 10000,
                                  double slope_threshold = -0.2) {
    CheckResult res;
    res.name = "dual-gap-decay";
    std::vector<double> gaps = dual_gap_series(trace, epsilon);
    if (static_cast<long>(gaps.size()) < late) {
        res.detail = "trace shorter than probe window";
        return res;
    }
    std::vector<double> avg = running_average(gaps);
    std::vector<double> steps(avg.size());
    for (std::size_t i = 0; i < avg.size(); ++i)
        steps[i] = static_cast<double>(i + 1);
    const double at_early = avg[static_cast<std::size_t>(early - 1)];
    const double at_late = avg[static_cast<std::size_t>(late - 1)];
    const double slope = loglog_slope(steps, avg,
                                      static_cast<std::size_t>(early - 1),
                                      static_cast<std::size_t>(late - 1));
    res.passed = at_late < at_early && slope <= slope_threshold;
    res.statistic = slope;
    res.bound = slope_threshold;
    res.detail = "avg gap " + std::to_string(at_early) + " @" +
                 std::to_string(early) + " -> " + std::to_string(at_late) +
                 " @" + std::to_string(late) + ", slope " + std::to_string(slope);
    return res;
}

/// Composite suboptimality must decay with log-log slope <= -0.8 on the
/// tail window, unless it already sits at the numerical floor.
inline CheckResult convex_rate_check(const IterateTrace& trace,
                                     double lambda_bar, double composite_min,
                                     double slope_threshold = -0.8,
                                     double floor = 1e-14) {
    CheckResult res;
    res.name = "convex-rate";
    std::vector<double> gap;
    std::vector<double> steps;
    gap.reserve(trace.rows.size());
    for (const TraceRow& row : trace.rows) {
        gap.push_back(row.loss_e + lambda_bar * row.loss_p - composite_min);
        steps.push_back(static_cast<double>(row.step + 1));
    }
    const double tail_gap = gap.back();
    // a negative gap means the composite dipped below the claimed optimum,
    // so the reference minimum cannot be right
    for (double v : gap) {
        if (v < -1e-12 * (1.0 + std::abs(composite_min))) {
            res.statistic = v;
            res.bound = 0.0;
            res.detail = "composite fell below the claimed optimum";
            return res;
        }
    }
    if (tail_gap <= floor) {
        res.passed = true;
        res.statistic = tail_gap;
        res.bound = floor;
        res.detail = "converged to numerical floor";
        return res;
    }
    const std::size_t first = gap.size() / 10;
    const double slope = loglog_slope(steps, gap, first, gap.size() - 1);
    // a fit can only be trusted if the gap actually shrank over the window
    const bool monotone_enough = gap.back() < gap[first];
    res.passed = monotone_enough && slope <= slope_threshold;
    res.statistic = slope;
    res.bound = slope_threshold;
    res.detail = monotone_enough
                     ? "tail slope " + std::to_string(slope)
                     : "gap not decreasing over fit window (wrong optimum?)";
    return res;
}

/// Running-minimum stationarity must fall between the probe steps and obey
/// runmin(t) <= c / sqrt(t) for the fitted c.
inline CheckResult stationarity_rate_check(const IterateTrace& trace,
                                           long early = 100, long late = 10000) {
    CheckResult res;
    res.name = "stationarity-rate";
    std::vector<double> stat;
    stat.reserve(trace.rows.size());
    for (const TraceRow& row : trace.rows) {
        if (row.stationarity < 0.0) {
            res.detail = "stationarity not instrumented";
            return res;
        }
        stat.push_back(row.stationarity);
    }
    if (static_cast<long>(stat.size()) < late) {
        res.detail = "trace shorter than probe window";
        return res;
    }
    std::vector<double> rmin = running_min(stat);
    double c_fit = 0.0;
    for (std::size_t i = 0; i < rmin.size(); ++i)
        c_fit = std::max(c_fit, rmin[i] * std::sqrt(static_cast<double>(i + 1)));
    const double at_early = rmin[static_cast<std::size_t>(early - 1)];
    const double at_late = rmin[static_cast<std::size_t>(late - 1)];
    res.passed = at_late < at_early && std::isfinite(c_fit);
    res.statistic = at_late;
    res.bound = at_early;
    res.detail = "running min " + std::to_string(at_early) + " -> " +
                 std::to_string(at_late) + ", fitted c " + std::to_string(c_fit);
    return res;
}

/// Per-step direction-norm bound
///   ||d_i||^2 <= (2/alpha_i)(L_e(x_i) - L_e(x_{i+1})) + 2 lambda_i eps_i,
/// valid when alpha_i <= 1/G. Checked with relative round-off slack.
inline CheckResult norm_bound_check(const IterateTrace& trace,
                                    const Schedule& alpha,
                                    const Schedule& epsilon, double smoothness,
                                    double rel_slack = 1e-9) {
    CheckResult res;
    res.name = "direction-norm-bound";
    if (trace.rows.empty()) {
        res.detail = "empty trace";
        return res;
    }
    long violations = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < trace.rows.size(); ++i) {
        const TraceRow& row = trace.rows[i];
        const double a = alpha(row.step);
        if (a > 1.0 / smoothness) {
            res.skipped = true;
            res.detail = "alpha exceeds 1/G (alpha=" + std::to_string(a) +
                         ", G=" + std::to_string(smoothness) + "), check not applicable";
            return res;
        }
        const double next_loss_e = (i + 1 < trace.rows.size())
                                       ? trace.rows[i + 1].loss_e
                                       : trace.final_loss_e;
        const double lhs = row.dir_norm * row.dir_norm;
        const double rhs = (2.0 / a) * (row.loss_e - next_loss_e) +
                           2.0 * row.lambda * epsilon(row.step);
        const double slack = rel_slack * (1.0 + lhs);
        if (lhs > rhs + slack) {
            ++violations;
            worst = std::max(worst, lhs - rhs);
        }
    }
    res.passed = violations == 0;
    res.statistic = static_cast<double>(violations);
    res.bound = 0.0;
    res.detail = violations == 0
                     ? "holds at every step"
                     : std::to_string(violations) + " violations, worst excess " +
                           std::to_string(worst);
    return res;
}

}  // namespace gradsurg::analysis
