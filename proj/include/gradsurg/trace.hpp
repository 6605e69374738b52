#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gradsurg/objective.hpp"
#include "gradsurg/vec.hpp"

namespace gradsurg {

/// Sentinel for per-step diagnostics that a run did not record (for
/// example separate gradient norms during a light implicit run). All
/// genuine values of these columns are non-negative.
inline constexpr double kNotRecorded = -1.0;

/// One solver step. Losses and gradients refer to the iterate the step
/// started from.
struct TraceRow {
    long step = 0;
    double loss_e = 0.0;
    double loss_p = 0.0;
    double lambda = 0.0;
    double grad_norm_e = kNotRecorded;
    double grad_norm_p = kNotRecorded;
    double dir_norm = 0.0;
    double stationarity = kNotRecorded;
    double delta = 0.0;  // drift estimate fed to the dual update
};

struct RunFailure {
    long step = 0;
    std::string message;
};

/// Complete record of one run: one row per executed step, final losses at
/// the last iterate, cumulative oracle counts, and (under full
/// instrumentation) the per-step gradient pairs needed by the dual-gap and
/// stationarity analyses.
struct IterateTrace {
    std::vector<TraceRow> rows;
    double final_loss_e = 0.0;
    double final_loss_p = 0.0;
    OracleCounts counts;
    std::vector<GradientPair> gradients;  // full instrumentation only

    long steps() const { return static_cast<long>(rows.size()); }
    bool instrumented() const { return gradients.size() == rows.size() && !rows.empty(); }
};

/// Trace plus termination status. Aborted runs keep the rows recorded up
/// to the failing step.
struct RunOutcome {
    IterateTrace trace;
    Vec final_params;
    std::optional<RunFailure> failure;

    bool ok() const { return !failure.has_value(); }
};

}  // namespace gradsurg
