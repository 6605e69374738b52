#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "gradsurg/attention.hpp"
#include "gradsurg/flow.hpp"
#include "gradsurg/objective.hpp"
#include "gradsurg/rng.hpp"
#include "gradsurg/vec.hpp"

namespace gradsurg::toy {

/// Loss weights shared by the image and video objectives.
struct LossWeights {
    double gamma1 = 0.01;  // attention penalty inside the erasure objective
    double gamma2 = 1.0;   // contrastive term inside the preservation objective
    double eta = 2.0;      // negative guidance magnitude
    double tau = 0.07;     // contrastive temperature

    void validate() const {
        if (gamma1 < 0.0 || gamma2 < 0.0) throw ConfigError("gammas must be >= 0");
        if (eta < 0.0) throw ConfigError("eta must be >= 0");
        if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    }
};

struct FlowProbe {
    Vec2 x;
    double t = 0.5;
};

/// Fixed probe bank for the velocity-erasure loss. Frozen-field velocities
/// are precomputed; the guided target is assembled per evaluation from eta.
struct ErasureBank {
    std::vector<FlowProbe> probes;
    std::vector<Vec2> v_cond_base;  // frozen field, target condition
    std::vector<Vec2> v_null_base;  // frozen field, null condition
};

/// Fixed probe bank pinning the frozen field on the preserved concepts.
struct RetentionBank {
    struct Entry {
        int token;
        std::vector<FlowProbe> probes;
        std::vector<Vec2> v_base;
    };
    std::vector<Entry> entries;
};

/// One attention probe: a (possibly scrambled) prompt at a high noise
/// level, with reference features extracted from the frozen projections.
struct AttnProbe {
    Prompt prompt;
    double t = 0.9;
    Vec syn_feature;
    std::vector<Vec> ir_features;
};

namespace detail {

inline std::vector<FlowProbe> sample_path_probes(const ConceptWorld& world,
                                                 int token, int count, Rng& rng) {
    std::vector<FlowProbe> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const Vec2 data = world.sample_data(token, rng);
        const Vec2 noise(rng.normal(), rng.normal());
        const double t = rng.uniform(0.05, 0.95);
        out.push_back({t * noise + (1.0 - t) * data, t});
    }
    return out;
}

}  // namespace detail

/// Two-objective unlearning problem on the toy flow model and attention
/// block. The parameter vector is the concatenation of the flow low-rank
/// delta and the attention low-rank delta:
///   erasure      L_e = guided velocity loss + gamma1 * attention penalty
///   preservation L_p = retention loss       + gamma2 * reverse contrastive.
class ImageUnlearnTask final : public TwoObjective {
public:
    ImageUnlearnTask(std::shared_ptr<const ToyFlowModel> flow,
                     std::shared_ptr<const ToyAttention> attn, LossWeights weights,
                     ErasureBank erasure, RetentionBank retention,
                     std::vector<AttnProbe> attn_probes)
        : flow_(std::move(flow)), attn_(std::move(attn)), weights_(weights),
          erasure_(std::move(erasure)), retention_(std::move(retention)),
          attn_probes_(std::move(attn_probes)) {
        weights_.validate();
        flow_dim_ = flow_->lora_dim();
        attn_dim_ = attn_->lora_dim();
    }

    Eigen::Index dim() const override { return flow_dim_ + attn_dim_; }
    Eigen::Index flow_dim() const { return flow_dim_; }
    Eigen::Index attn_dim() const { return attn_dim_; }

    /// Optimization start point: zero effective delta, factors off their
    /// saddle (see initial_delta on the models).
    Vec initial_params(Rng& rng) const {
        Vec v(dim());
        v.head(flow_dim_) = flow_->initial_delta(rng);
        v.tail(attn_dim_) = attn_->initial_delta(rng);
        return v;
    }
    const ToyFlowModel& flow() const { return *flow_; }
    const ToyAttention& attention() const { return *attn_; }
    const LossWeights& weights() const { return weights_; }

    double value_e(const Vec& x) const override {
        return erasure_loss(x) + weights_.gamma1 * attention_penalty(x);
    }

    double value_p(const Vec& x) const override {
        return retention_loss(x) + weights_.gamma2 * contrastive_loss(x);
    }

    Vec gradient_e(const Vec& x) const override {
        Vec g = Vec::Zero(dim());
        erasure_loss(x, &g, 1.0);
        attention_penalty(x, &g, weights_.gamma1);
        return g;
    }

    Vec gradient_p(const Vec& x) const override {
        Vec g = Vec::Zero(dim());
        retention_loss(x, &g, 1.0);
        contrastive_loss(x, &g, weights_.gamma2);
        return g;
    }

    /// Mean squared distance between the adapted velocity on the target
    /// condition and the negatively guided frozen target.
    double erasure_loss(const Vec& params, Vec* grad = nullptr,
                        double weight = 1.0) const {
        const FlowLora lora = flow_->unpack(params.head(flow_dim_));
        const double inv_n = 1.0 / static_cast<double>(erasure_.probes.size());
        double total = 0.0;
        Vec flow_grad = grad ? Vec(Vec::Zero(flow_dim_)) : Vec();
        for (std::size_t i = 0; i < erasure_.probes.size(); ++i) {
            const FlowProbe& pr = erasure_.probes[i];
            const Vec2 target =
                erasure_.v_null_base[i] -
                weights_.eta * (erasure_.v_cond_base[i] - erasure_.v_null_base[i]);
            if (grad) {
                detailed_residual_grad(pr, ConceptWorld::kTarget, target, lora,
                                       inv_n * weight, total, flow_grad);
            } else {
                const Vec2 v = flow_->velocity(pr.x, ConceptWorld::kTarget, pr.t, lora);
                total += (v - target).squaredNorm();
            }
        }
        if (grad) grad->head(flow_dim_) += flow_grad;
        return total * inv_n;
    }

    /// Mean squared drift of the adapted velocity from the frozen velocity
    /// across the preserved concepts.
    double retention_loss(const Vec& params, Vec* grad = nullptr,
                          double weight = 1.0) const {
        const FlowLora lora = flow_->unpack(params.head(flow_dim_));
        std::size_t count = 0;
        for (const auto& e : retention_.entries) count += e.probes.size();
        const double inv_n = 1.0 / static_cast<double>(count);
        double total = 0.0;
        Vec flow_grad = grad ? Vec(Vec::Zero(flow_dim_)) : Vec();
        for (const auto& entry : retention_.entries) {
            for (std::size_t i = 0; i < entry.probes.size(); ++i) {
                const FlowProbe& pr = entry.probes[i];
                if (grad) {
                    detailed_residual_grad(pr, entry.token, entry.v_base[i], lora,
                                           inv_n * weight, total, flow_grad);
                } else {
                    const Vec2 v = flow_->velocity(pr.x, entry.token, pr.t, lora);
                    total += (v - entry.v_base[i]).squaredNorm();
                }
            }
        }
        if (grad) grad->head(flow_dim_) += flow_grad;
        return total * inv_n;
    }

    /// Mean attention mass on the target token positions.
    double attention_penalty(const Vec& params, Vec* grad = nullptr,
                             double weight = 1.0) const {
        const AttnLora lora = attn_->unpack(params.tail(attn_dim_));
        const double inv_n = 1.0 / static_cast<double>(attn_probes_.size());
        double total = 0.0;
        Vec attn_grad = grad ? Vec(Vec::Zero(attn_dim_)) : Vec();
        for (const AttnProbe& pr : attn_probes_) {
            if (grad) {
                total += attn_->attention_mass_with_grad(
                    pr.prompt, pr.t, lora, pr.prompt.concept_positions, attn_grad,
                    inv_n * weight);
            } else {
                total += ToyAttention::attention_mass(
                    attn_->attention(pr.prompt, pr.t, lora),
                    pr.prompt.concept_positions);
            }
        }
        if (grad) grad->tail(attn_dim_) += attn_grad;
        return total * inv_n;
    }

    /// Mean reverse contrastive loss over the attention probes. The live
    /// feature comes from the adapted projections; synonym and irrelevant
    /// references are frozen.
    double contrastive_loss(const Vec& params, Vec* grad = nullptr,
                            double weight = 1.0) const {
        const AttnLora lora = attn_->unpack(params.tail(attn_dim_));
        const double inv_n = 1.0 / static_cast<double>(attn_probes_.size());
        double total = 0.0;
        Vec attn_grad = grad ? Vec(Vec::Zero(attn_dim_)) : Vec();
        for (const AttnProbe& pr : attn_probes_) {
            ConceptFeatures f;
            f.tau = weights_.tau;
            f.synonym = pr.syn_feature;
            f.irrelevant = pr.ir_features;
            if (grad) {
                // two passes: feature value first, then chain the loss
                // gradient back through the feature extraction
                f.target = attn_->feature(pr.prompt, pr.t, lora);
                Vec dtarget;
                total += reverse_contrastive_loss(f, &dtarget);
                dtarget *= inv_n * weight;
                attn_->feature_with_grad(pr.prompt, pr.t, lora, dtarget, attn_grad);
            } else {
                f.target = attn_->feature(pr.prompt, pr.t, lora);
                total += reverse_contrastive_loss(f);
            }
        }
        if (grad) grad->tail(attn_dim_) += attn_grad;
        return total * inv_n;
    }

private:
    void detailed_residual_grad(const FlowProbe& pr, int token, const Vec2& target,
                                const FlowLora& lora, double scale, double& total,
                                Vec& flow_grad) const {
        // forward once to get the residual, then backward with 2*r*scale
        const Vec2 v = flow_->velocity(pr.x, token, pr.t, lora);
        const Vec2 residual = v - target;
        total += residual.squaredNorm();
        flow_->velocity_with_grad(pr.x, token, pr.t, lora,
                                  Vec2(2.0 * scale * residual), flow_grad);
    }

    std::shared_ptr<const ToyFlowModel> flow_;
    std::shared_ptr<const ToyAttention> attn_;
    LossWeights weights_;
    ErasureBank erasure_;
    RetentionBank retention_;
    std::vector<AttnProbe> attn_probes_;
    Eigen::Index flow_dim_ = 0;
    Eigen::Index attn_dim_ = 0;
};

/// Bank sizes for task construction.
struct TaskShape {
    int esd_probes = 16;
    int retention_probes_per_concept = 8;
    int attention_probes = 4;
    int prompt_fillers = 5;  // text prompt length is fillers + 1 concept slot
    bool scramble = true;
};

/// Build the erasure/retention/attention probe banks for one frame (or the
/// single image) from a dedicated stream.
inline std::shared_ptr<ImageUnlearnTask> make_image_task(
    std::shared_ptr<const ToyFlowModel> flow,
    std::shared_ptr<const ToyAttention> attn, const LossWeights& weights,
    const TaskShape& shape, Rng& rng) {
    const ConceptWorld& world = flow->world();
    const AttnVocab& vocab = attn->vocab();

    ErasureBank erasure;
    erasure.probes =
        detail::sample_path_probes(world, ConceptWorld::kTarget, shape.esd_probes, rng);
    for (const FlowProbe& pr : erasure.probes) {
        erasure.v_cond_base.push_back(
            flow->velocity_base(pr.x, ConceptWorld::kTarget, pr.t));
        erasure.v_null_base.push_back(
            flow->velocity_base(pr.x, ConceptWorld::kNull, pr.t));
    }

    // Retention probes are trajectory-aligned: half sit on the preserved
    // concept's own path, half reuse latents from the erased concept's path
    // (the region the edit acts on) with the preserved token substituted.
    RetentionBank retention;
    for (int k = 0; k < world.k_irrelevant; ++k) {
        RetentionBank::Entry entry;
        entry.token = world.irrelevant_token(k);
        const int own = shape.retention_probes_per_concept / 2;
        entry.probes = detail::sample_path_probes(world, entry.token, own, rng);
        std::vector<FlowProbe> shared = detail::sample_path_probes(
            world, ConceptWorld::kTarget,
            shape.retention_probes_per_concept - own, rng);
        entry.probes.insert(entry.probes.end(), shared.begin(), shared.end());
        for (const FlowProbe& pr : entry.probes)
            entry.v_base.push_back(flow->velocity_base(pr.x, entry.token, pr.t));
        retention.entries.push_back(std::move(entry));
    }

    std::vector<AttnProbe> attn_probes;
    for (int i = 0; i < shape.attention_probes; ++i) {
        Prompt base;
        base.tokens.reserve(static_cast<std::size_t>(shape.prompt_fillers) + 1);
        const std::size_t slot = rng.below(static_cast<std::uint64_t>(shape.prompt_fillers + 1));
        for (int j = 0; j <= shape.prompt_fillers; ++j) {
            if (static_cast<std::size_t>(j) == slot) {
                base.tokens.push_back(AttnVocab::kTarget);
                base.concept_positions.push_back(static_cast<std::size_t>(j));
            } else {
                base.tokens.push_back(vocab.filler(
                    static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab.n_fillers)))));
            }
        }
        AttnProbe probe;
        probe.prompt = shape.scramble ? scramble_tokens(base, rng) : base;
        probe.t = rng.uniform(0.8, 1.0);

        // reference features: same word order, concept slot substituted
        Prompt variant = probe.prompt;
        auto substitute = [&](int token) {
            for (std::size_t pos : variant.concept_positions)
                variant.tokens[pos] = token;
        };
        substitute(AttnVocab::kSynonym);
        probe.syn_feature = attn->feature_base(variant, probe.t);
        for (int k = 0; k < vocab.k_irrelevant; ++k) {
            substitute(vocab.irrelevant(k));
            probe.ir_features.push_back(attn->feature_base(variant, probe.t));
        }
        attn_probes.push_back(std::move(probe));
    }

    return std::make_shared<ImageUnlearnTask>(std::move(flow), std::move(attn),
                                              weights, std::move(erasure),
                                              std::move(retention),
                                              std::move(attn_probes));
}

/// Attention-only problem: suppress mass on the target token while the
/// contrastive term keeps the live feature aligned with the irrelevant
/// references. Parameters are the attention delta alone.
class AttentionOnlyTask final : public TwoObjective {
public:
    AttentionOnlyTask(std::shared_ptr<const ImageUnlearnTask> inner)
        : inner_(std::move(inner)) {}

    Eigen::Index dim() const override { return inner_->attn_dim(); }

    Vec initial_params(Rng& rng) const {
        Vec full = inner_->initial_params(rng);
        return full.tail(dim());
    }

    double value_e(const Vec& x) const override {
        return inner_->attention_penalty(lift(x));
    }
    double value_p(const Vec& x) const override {
        return inner_->contrastive_loss(lift(x));
    }
    Vec gradient_e(const Vec& x) const override {
        Vec g = Vec::Zero(inner_->dim());
        inner_->attention_penalty(lift(x), &g, 1.0);
        return g.tail(dim());
    }
    Vec gradient_p(const Vec& x) const override {
        Vec g = Vec::Zero(inner_->dim());
        inner_->contrastive_loss(lift(x), &g, 1.0);
        return g.tail(dim());
    }

private:
    Vec lift(const Vec& x) const {
        Vec full = Vec::Zero(inner_->dim());
        full.tail(dim()) = x;
        return full;
    }

    std::shared_ptr<const ImageUnlearnTask> inner_;
};

/// Spatio-temporal toy volume: the anchor frame carries the full image
/// objective pair; the remaining frames contribute frame-averaged
/// volumetric terms. With a single frame the pair reduces to the anchor's
/// image objective exactly.
class VideoUnlearnTask final : public TwoObjective {
public:
    VideoUnlearnTask(std::vector<std::shared_ptr<ImageUnlearnTask>> frames)
        : frames_(std::move(frames)) {
        if (frames_.empty()) throw ConfigError("video needs at least one frame");
    }

    Eigen::Index dim() const override { return frames_.front()->dim(); }
    Vec initial_params(Rng& rng) const { return frames_.front()->initial_params(rng); }
    int frame_count() const { return static_cast<int>(frames_.size()); }
    const ImageUnlearnTask& anchor() const { return *frames_.front(); }
    const ImageUnlearnTask& frame(int f) const {
        return *frames_[static_cast<std::size_t>(f)];
    }

    double value_e(const Vec& x) const override {
        double total = frames_.front()->value_e(x);
        if (frames_.size() > 1) {
            const double inv = 1.0 / static_cast<double>(frames_.size() - 1);
            for (std::size_t f = 1; f < frames_.size(); ++f)
                total += inv * frames_[f]->value_e(x);
        }
        return total;
    }

    double value_p(const Vec& x) const override {
        double total = frames_.front()->value_p(x);
        if (frames_.size() > 1) {
            const double inv = 1.0 / static_cast<double>(frames_.size() - 1);
            for (std::size_t f = 1; f < frames_.size(); ++f)
                total += inv * frames_[f]->value_p(x);
        }
        return total;
    }

    Vec gradient_e(const Vec& x) const override {
        Vec g = frames_.front()->gradient_e(x);
        if (frames_.size() > 1) {
            const double inv = 1.0 / static_cast<double>(frames_.size() - 1);
            for (std::size_t f = 1; f < frames_.size(); ++f)
                g += inv * frames_[f]->gradient_e(x);
        }
        return g;
    }

    Vec gradient_p(const Vec& x) const override {
        Vec g = frames_.front()->gradient_p(x);
        if (frames_.size() > 1) {
            const double inv = 1.0 / static_cast<double>(frames_.size() - 1);
            for (std::size_t f = 1; f < frames_.size(); ++f)
                g += inv * frames_[f]->gradient_p(x);
        }
        return g;
    }

    /// Frame-averaged attention penalty over the whole volume (all frames,
    /// anchor included).
    double volumetric_attention_penalty(const Vec& x) const {
        double total = 0.0;
        for (const auto& f : frames_) total += f->attention_penalty(x);
        return total / static_cast<double>(frames_.size());
    }

private:
    std::vector<std::shared_ptr<ImageUnlearnTask>> frames_;
};

/// Build a T-frame video task. Each frame gets its own probe banks from a
/// split stream; all frames share the models and the parameter vector.
inline std::shared_ptr<VideoUnlearnTask> make_video_task(
    std::shared_ptr<const ToyFlowModel> flow,
    std::shared_ptr<const ToyAttention> attn, const LossWeights& weights,
    const TaskShape& shape, int frames, Rng& rng) {
    if (frames < 1) throw ConfigError("frame count must be >= 1");
    std::vector<std::shared_ptr<ImageUnlearnTask>> per_frame;
    per_frame.reserve(static_cast<std::size_t>(frames));
    for (int f = 0; f < frames; ++f) {
        Rng frame_rng = rng.split();
        per_frame.push_back(make_image_task(flow, attn, weights, shape, frame_rng));
    }
    return std::make_shared<VideoUnlearnTask>(std::move(per_frame));
}

/// Generation-side quality: per-concept accuracy of Euler samples around
/// their modes, and the balance score acc_irrelevant - acc_target.
struct AccuracyReport {
    double acc_target = 0.0;
    double acc_irrelevant = 0.0;  // mean over irrelevant concepts
    std::vector<double> per_irrelevant;
    double balance() const { return acc_irrelevant - acc_target; }
};

inline AccuracyReport measure_accuracy(const ToyFlowModel& model,
                                       const FlowLora& lora, int samples,
                                       int steps, double radius, Rng& rng) {
    const ConceptWorld& world = model.world();
    auto accuracy_for = [&](int token) {
        std::vector<std::optional<Vec2>> pts;
        pts.reserve(static_cast<std::size_t>(samples));
        for (int i = 0; i < samples; ++i) {
            const Vec2 start(rng.normal(), rng.normal());
            pts.push_back(euler_sample(model, lora, start, token, steps));
        }
        return concept_accuracy(pts, world.mode_of(token), radius);
    };
    AccuracyReport rep;
    rep.acc_target = accuracy_for(ConceptWorld::kTarget);
    for (int k = 0; k < world.k_irrelevant; ++k) {
        rep.per_irrelevant.push_back(accuracy_for(world.irrelevant_token(k)));
        rep.acc_irrelevant += rep.per_irrelevant.back();
    }
    rep.acc_irrelevant /= static_cast<double>(world.k_irrelevant);
    return rep;
}

}  // namespace gradsurg::toy
