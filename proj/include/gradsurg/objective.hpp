#pragma once

#include <cstdint>
#include <memory>
#include <utility>

#include "gradsurg/vec.hpp"

namespace gradsurg {

/// Loss value together with its gradient, as produced by one backward pass.
struct ValueGrad {
    double value = 0.0;
    Vec grad;
};

/// Result of one backward pass through the composite L_e + lambda * L_p.
/// The forward pass yields both component losses as byproducts.
struct CompositeEval {
    double loss_e = 0.0;
    double loss_p = 0.0;
    Vec grad;  // grad_e + lambda * grad_p
};

/// Oracle-call accounting. `grad` counts backward passes: a combined
/// composite gradient is one backward, separate per-objective gradients
/// are one backward each. Loss-only evaluations never touch `grad`.
struct OracleCounts {
    std::int64_t loss_e = 0;
    std::int64_t loss_p = 0;
    std::int64_t grad = 0;
};

/// A pair of scalar objectives over a shared parameter vector. Concrete
/// problems implement values and gradients; gradients must match central
/// finite differences to relative 1e-5.
class TwoObjective {
public:
    virtual ~TwoObjective() = default;

    virtual Eigen::Index dim() const = 0;
    virtual double value_e(const Vec& x) const = 0;
    virtual double value_p(const Vec& x) const = 0;
    virtual Vec gradient_e(const Vec& x) const = 0;
    virtual Vec gradient_p(const Vec& x) const = 0;
};

/// Counting facade over a TwoObjective. One solver run owns exactly one
/// instance; counters are plain integers under that exclusive-ownership
/// contract.
class ObjectivePair {
public:
    explicit ObjectivePair(std::shared_ptr<const TwoObjective> fn)
        : fn_(std::move(fn)) {}

    Eigen::Index dim() const { return fn_->dim(); }

    double loss_e(const Vec& x) {
        ++counts_.loss_e;
        return fn_->value_e(x);
    }

    double loss_p(const Vec& x) {
        ++counts_.loss_p;
        return fn_->value_p(x);
    }

    ValueGrad grad_e(const Vec& x) {
        ++counts_.grad;
        return {fn_->value_e(x), fn_->gradient_e(x)};
    }

    ValueGrad grad_p(const Vec& x) {
        ++counts_.grad;
        return {fn_->value_p(x), fn_->gradient_p(x)};
    }

    /// Single backward pass through L_e + lambda * L_p.
    CompositeEval grad_composite(const Vec& x, double lambda) {
        ++counts_.grad;
        CompositeEval out;
        out.loss_e = fn_->value_e(x);
        out.loss_p = fn_->value_p(x);
        out.grad = fn_->gradient_e(x) + lambda * fn_->gradient_p(x);
        return out;
    }

    const OracleCounts& counts() const { return counts_; }

    /// Uncounted access for instrumentation and analysis probes. Work done
    /// through this reference is diagnostic, not solver cost.
    const TwoObjective& raw() const { return *fn_; }

    std::shared_ptr<const TwoObjective> shared() const { return fn_; }

private:
    std::shared_ptr<const TwoObjective> fn_;
    OracleCounts counts_;
};

}  // namespace gradsurg
