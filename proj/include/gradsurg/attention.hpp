#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gradsurg/rng.hpp"
#include "gradsurg/vec.hpp"

namespace gradsurg::toy {

// Single-block attention toy. Text and pixel token embeddings are
// concatenated into one sequence; queries and keys come from shared
// projections with low-rank deltas (the only trainable parameters); the
// attention map is the row-softmax of QK'/sqrt(d_head). Pixel embeddings
// drift linearly with the noise level so features can be extracted at high
// noise as in the probe banks.

struct AttnArch {
    int d_model = 8;
    int heads = 2;
    int head_dim = 4;
    int rank = 2;
    int n_pixels = 4;
    int proj_dim() const { return heads * head_dim; }
};

/// Text-token vocabulary for prompts: the erase target, its synonym, the
/// irrelevant concepts, and filler words.
struct AttnVocab {
    static constexpr int kTarget = 0;
    static constexpr int kSynonym = 1;
    int k_irrelevant = 3;
    int n_fillers = 8;

    int irrelevant(int i) const { return 2 + i; }
    int filler(int i) const { return 2 + k_irrelevant + i; }
    int size() const { return 2 + k_irrelevant + n_fillers; }
};

/// A prompt is an ordered list of text tokens plus the positions that hold
/// the concept being probed (a contiguous range before scrambling, an
/// explicit position list after).
struct Prompt {
    std::vector<int> tokens;
    std::vector<std::size_t> concept_positions;
};

/// Uniformly permute the prompt's word order and remap the concept
/// positions so they keep pointing at the same tokens.
inline Prompt scramble_tokens(const Prompt& prompt, Rng& rng) {
    const std::size_t n = prompt.tokens.size();
    std::vector<std::size_t> perm = rng.permutation(n);
    Prompt out;
    out.tokens.resize(n);
    std::vector<std::size_t> inverse(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.tokens[i] = prompt.tokens[perm[i]];
        inverse[perm[i]] = i;
    }
    out.concept_positions.reserve(prompt.concept_positions.size());
    for (std::size_t pos : prompt.concept_positions)
        out.concept_positions.push_back(inverse[pos]);
    std::sort(out.concept_positions.begin(), out.concept_positions.end());
    return out;
}

struct AttnLora {
    Mat Aq, Bq, Ak, Bk;
};

namespace detail {

struct AttnCache {
    Mat E;                  // (n_tokens_total x d_model)
    Mat Q, K;               // (n x proj_dim)
    std::vector<Mat> probs; // per head, (n x n) row-stochastic
};

}  // namespace detail

class ToyAttention {
public:
    ToyAttention(AttnVocab vocab, AttnArch arch, Rng& rng)
        : vocab_(vocab), arch_(arch) {
        auto init = [&](Eigen::Index r, Eigen::Index c, double scale) {
            Mat m(r, c);
            for (Eigen::Index i = 0; i < r; ++i)
                for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, scale);
            return m;
        };
        text_embed_ = init(vocab.size(), arch.d_model, 1.0);
        // same entanglement structure as the flow vocabulary
        auto entangle = [&](int token, int anchor, double rho) {
            text_embed_.row(token) = rho * text_embed_.row(anchor) +
                                     std::sqrt(1.0 - rho * rho) * text_embed_.row(token);
        };
        entangle(AttnVocab::kSynonym, AttnVocab::kTarget, 0.9);
        entangle(vocab.irrelevant(0), AttnVocab::kTarget, 0.95);
        pixel_base_ = init(arch.n_pixels, arch.d_model, 1.0);
        pixel_drift_ = init(arch.n_pixels, arch.d_model, 0.5);
        const double w_scale = 1.0 / std::sqrt(arch.d_model);
        Wq_ = init(arch.proj_dim(), arch.d_model, w_scale);
        Wk_ = init(arch.proj_dim(), arch.d_model, w_scale);
    }

    const AttnVocab& vocab() const { return vocab_; }
    const AttnArch& arch() const { return arch_; }

    Eigen::Index lora_dim() const {
        return 2 * (arch_.rank * arch_.d_model +
                    static_cast<Eigen::Index>(arch_.proj_dim()) * arch_.rank);
    }

    AttnLora unpack(const Eigen::Ref<const Vec>& flat) const {
        if (flat.size() != lora_dim()) throw ConfigError("bad attention lora size");
        AttnLora l;
        Eigen::Index at = 0;
        auto take = [&](Eigen::Index rows, Eigen::Index cols) {
            Mat m = Eigen::Map<const Mat>(flat.data() + at, rows, cols);
            at += rows * cols;
            return m;
        };
        l.Aq = take(arch_.rank, arch_.d_model);
        l.Bq = take(arch_.proj_dim(), arch_.rank);
        l.Ak = take(arch_.rank, arch_.d_model);
        l.Bk = take(arch_.proj_dim(), arch_.rank);
        return l;
    }

    Vec zero_lora() const { return Vec::Zero(lora_dim()); }

    /// Random down-projections, zero up-projections: zero effective delta
    /// with non-vanishing gradients.
    Vec initial_delta(Rng& rng) const {
        Vec v = Vec::Zero(lora_dim());
        const double scale = 1.0 / std::sqrt(arch_.d_model);
        const Eigen::Index a_size =
            static_cast<Eigen::Index>(arch_.rank) * arch_.d_model;
        const Eigen::Index b_size =
            static_cast<Eigen::Index>(arch_.proj_dim()) * arch_.rank;
        for (Eigen::Index i = 0; i < a_size; ++i) v[i] = rng.normal(0.0, scale);
        for (Eigen::Index i = 0; i < a_size; ++i)
            v[a_size + b_size + i] = rng.normal(0.0, scale);
        return v;
    }

    int sequence_length(const Prompt& prompt) const {
        return static_cast<int>(prompt.tokens.size()) + arch_.n_pixels;
    }

    /// Attention maps of the frozen projections.
    std::vector<Mat> attention_base(const Prompt& prompt, double t) const {
        detail::AttnCache c;
        forward(prompt, t, nullptr, c);
        return c.probs;
    }

    std::vector<Mat> attention(const Prompt& prompt, double t,
                               const AttnLora& lora) const {
        detail::AttnCache c;
        forward(prompt, t, &lora, c);
        return c.probs;
    }

    /// Total attention mass landing on the given key positions, summed over
    /// heads and queries. An empty position list yields zero.
    static double attention_mass(const std::vector<Mat>& probs,
                                 const std::vector<std::size_t>& positions) {
        double total = 0.0;
        for (const Mat& p : probs)
            for (std::size_t k : positions) total += p.col(static_cast<Eigen::Index>(k)).sum();
        return total;
    }

    /// attention_mass of the adapted map plus its gradient with respect to
    /// the flat lora vector.
    double attention_mass_with_grad(const Prompt& prompt, double t,
                                    const AttnLora& lora,
                                    const std::vector<std::size_t>& positions,
                                    Vec& lora_grad_acc, double weight = 1.0) const {
        detail::AttnCache c;
        forward(prompt, t, &lora, c);
        const double value = attention_mass(c.probs, positions);
        if (!positions.empty() && weight != 0.0) {
            const Eigen::Index n = c.probs.front().rows();
            std::vector<Mat> dprobs(c.probs.size(), Mat::Zero(n, n));
            for (auto& dp : dprobs)
                for (std::size_t k : positions)
                    dp.col(static_cast<Eigen::Index>(k)).setConstant(weight);
            backward_from_dprobs(c, lora, dprobs, lora_grad_acc);
        }
        return value;
    }

    /// Pooled attention feature of a prompt: mean over heads and queries of
    /// the attention rows, L2-normalized. Length equals the sequence length.
    Vec feature_base(const Prompt& prompt, double t) const {
        detail::AttnCache c;
        forward(prompt, t, nullptr, c);
        return normalized_pool(c.probs);
    }

    Vec feature(const Prompt& prompt, double t, const AttnLora& lora) const {
        detail::AttnCache c;
        forward(prompt, t, &lora, c);
        return normalized_pool(c.probs);
    }

    /// Adapted feature plus chain rule of a downstream dL/dfeature into the
    /// flat lora gradient.
    Vec feature_with_grad(const Prompt& prompt, double t, const AttnLora& lora,
                          const Vec& dfeature, Vec& lora_grad_acc) const {
        detail::AttnCache c;
        forward(prompt, t, &lora, c);
        Vec pooled = pool(c.probs);
        const double norm = pooled.norm();
        Vec f = pooled / norm;
        // through the normalization: dL/du = (dF - F (F . dF)) / ||u||
        Vec dpool = (dfeature - f * f.dot(dfeature)) / norm;
        const Eigen::Index n = c.probs.front().rows();
        const double scale = 1.0 / (static_cast<double>(arch_.heads) * n);
        std::vector<Mat> dprobs(c.probs.size(), Mat::Zero(n, n));
        for (auto& dp : dprobs) dp = scale * Vec::Ones(n) * dpool.transpose();
        backward_from_dprobs(c, lora, dprobs, lora_grad_acc);
        return f;
    }

    /// Largest deviation of any attention row sum from 1; softmax must keep
    /// this at round-off scale no matter the parameters.
    static double max_row_sum_error(const std::vector<Mat>& probs) {
        double worst = 0.0;
        for (const Mat& p : probs)
            for (Eigen::Index q = 0; q < p.rows(); ++q)
                worst = std::max(worst, std::abs(p.row(q).sum() - 1.0));
        return worst;
    }

private:
    void forward(const Prompt& prompt, double t, const AttnLora* lora,
                 detail::AttnCache& c) const {
        const int n_text = static_cast<int>(prompt.tokens.size());
        const int n = n_text + arch_.n_pixels;
        c.E.resize(n, arch_.d_model);
        for (int i = 0; i < n_text; ++i) {
            const int tok = prompt.tokens[static_cast<std::size_t>(i)];
            if (tok < 0 || tok >= vocab_.size()) throw ConfigError("unknown text token");
            c.E.row(i) = text_embed_.row(tok);
        }
        for (int p = 0; p < arch_.n_pixels; ++p)
            c.E.row(n_text + p) = pixel_base_.row(p) + t * pixel_drift_.row(p);

        Mat wq = Wq_, wk = Wk_;
        if (lora) {
            wq += lora->Bq * lora->Aq;
            wk += lora->Bk * lora->Ak;
        }
        c.Q = c.E * wq.transpose();
        c.K = c.E * wk.transpose();

        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(arch_.head_dim));
        c.probs.assign(static_cast<std::size_t>(arch_.heads), Mat());
        for (int h = 0; h < arch_.heads; ++h) {
            Mat qh = c.Q.middleCols(h * arch_.head_dim, arch_.head_dim);
            Mat kh = c.K.middleCols(h * arch_.head_dim, arch_.head_dim);
            Mat scores = inv_sqrt * (qh * kh.transpose());
            Mat& p = c.probs[static_cast<std::size_t>(h)];
            p.resize(n, n);
            for (Eigen::Index q = 0; q < n; ++q) {
                Vec row = scores.row(q);
                const double m = row.maxCoeff();
                Vec ex = (row.array() - m).exp();
                p.row(q) = ex / ex.sum();
            }
        }
    }

    void backward_from_dprobs(const detail::AttnCache& c, const AttnLora& lora,
                              const std::vector<Mat>& dprobs,
                              Vec& lora_grad_acc) const {
        const Eigen::Index n = c.probs.front().rows();
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(arch_.head_dim));
        Mat dQ = Mat::Zero(n, arch_.proj_dim());
        Mat dK = Mat::Zero(n, arch_.proj_dim());
        for (int h = 0; h < arch_.heads; ++h) {
            const Mat& p = c.probs[static_cast<std::size_t>(h)];
            const Mat& dp = dprobs[static_cast<std::size_t>(h)];
            Mat ds(n, n);
            for (Eigen::Index q = 0; q < n; ++q) {
                const double inner = p.row(q).dot(dp.row(q));
                ds.row(q) = p.row(q).cwiseProduct(dp.row(q) -
                                                  Vec::Constant(n, inner).transpose());
            }
            Mat qh = c.Q.middleCols(h * arch_.head_dim, arch_.head_dim);
            Mat kh = c.K.middleCols(h * arch_.head_dim, arch_.head_dim);
            dQ.middleCols(h * arch_.head_dim, arch_.head_dim) = inv_sqrt * (ds * kh);
            dK.middleCols(h * arch_.head_dim, arch_.head_dim) =
                inv_sqrt * (ds.transpose() * qh);
        }
        Mat dWq = dQ.transpose() * c.E;
        Mat dWk = dK.transpose() * c.E;

        Eigen::Index at = 0;
        auto add = [&](const Mat& m) {
            Eigen::Map<Vec>(lora_grad_acc.data() + at, m.size()) +=
                Eigen::Map<const Vec>(m.data(), m.size());
            at += m.size();
        };
        add(Mat(lora.Bq.transpose() * dWq));  // dAq
        add(Mat(dWq * lora.Aq.transpose()));  // dBq
        add(Mat(lora.Bk.transpose() * dWk));
        add(Mat(dWk * lora.Ak.transpose()));
    }

    Vec pool(const std::vector<Mat>& probs) const {
        const Eigen::Index n = probs.front().rows();
        Vec pooled = Vec::Zero(n);
        for (const Mat& p : probs) pooled += p.colwise().sum().transpose();
        pooled /= static_cast<double>(arch_.heads) * static_cast<double>(n);
        return pooled;
    }

    Vec normalized_pool(const std::vector<Mat>& probs) const {
        Vec pooled = pool(probs);
        return pooled / pooled.norm();
    }

    AttnVocab vocab_;
    AttnArch arch_;
    Mat text_embed_, pixel_base_, pixel_drift_;
    Mat Wq_, Wk_;
};

/// Feature bundle entering the reverse contrastive loss.
struct ConceptFeatures {
    Vec target;               // live feature of the concept being erased
    Vec synonym;              // reference feature it should move away from
    std::vector<Vec> irrelevant;  // reference features it should blend into
    double tau = 0.07;

    void validate() const {
        if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
        if (irrelevant.empty()) throw ConfigError("need at least one irrelevant feature");
        for (const Vec& f : irrelevant)
            if (f.size() != target.size()) throw ConfigError("feature lengths differ");
        if (synonym.size() != target.size()) throw ConfigError("feature lengths differ");
    }
};

/// Inverted InfoNCE: log( sum_i exp(F.F_irr_i / tau) / exp(F.F_syn / tau) ).
/// Minimizing pulls the live feature toward the irrelevant references and
/// away from the synonym. Stabilized with max subtraction; optional gradient
/// with respect to the live feature.
inline double reverse_contrastive_loss(const ConceptFeatures& f,
                                       Vec* dtarget = nullptr) {
    f.validate();
    const std::size_t k = f.irrelevant.size();
    std::vector<double> sims(k);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        sims[i] = f.target.dot(f.irrelevant[i]) / f.tau;
        m = std::max(m, sims[i]);
    }
    double denom = 0.0;
    for (std::size_t i = 0; i < k; ++i) denom += std::exp(sims[i] - m);
    const double sim_syn = f.target.dot(f.synonym) / f.tau;
    const double loss = m + std::log(denom) - sim_syn;
    if (dtarget) {
        Vec g = -f.synonym / f.tau;
        for (std::size_t i = 0; i < k; ++i)
            g += (std::exp(sims[i] - m) / denom) * f.irrelevant[i] / f.tau;
        *dtarget = g;
    }
    return loss;
}

}  // namespace gradsurg::toy
