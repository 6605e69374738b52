#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "gradsurg/config.hpp"
#include "gradsurg/quadratics.hpp"
#include "gradsurg/solver.hpp"
#include "gradsurg/tasks.hpp"
#include "gradsurg/trace_io.hpp"

namespace gradsurg::bench {

namespace fs = std::filesystem;

/// A problem instance built deterministically from a config seed: the
/// objective, its start point, and whatever generative context the problem
/// kind carries (used by summaries and the video checks).
struct ProblemBundle {
    std::shared_ptr<const TwoObjective> objective;
    Vec theta0;
    std::shared_ptr<const toy::ToyFlowModel> flow;             // toyflow kinds
    std::shared_ptr<const toy::ImageUnlearnTask> image_task;   // toyflow-image
    std::shared_ptr<const toy::VideoUnlearnTask> video_task;   // toyflow-video
    std::shared_ptr<const QuadraticPair> quadratic;            // quadratic kind
};

/// Deterministic stream layout per run: every consumer gets its own split
/// of the root stream, in a fixed order.
struct SeedPlan {
    Rng flow, attention, pretrain, banks, theta0, sampling;

    explicit SeedPlan(std::uint64_t seed) : SeedPlan(Rng(seed)) {}

private:
    explicit SeedPlan(Rng root)
        : flow(root.split()), attention(root.split()), pretrain(root.split()),
          banks(root.split()), theta0(root.split()), sampling(root.split()) {}
};

inline ProblemBundle build_problem(const RunConfig& cfg) {
    cfg.validate();
    ProblemBundle b;
    SeedPlan seeds(cfg.seed);

    switch (cfg.problem.kind) {
        case ProblemKind::quadratic: {
            std::shared_ptr<QuadraticPair> quad;
            if (cfg.problem.preset == "conflicting")
                quad = QuadraticPair::conflicting(cfg.problem.dim);
            else
                quad = QuadraticPair::random(cfg.problem.dim, seeds.banks);
            b.quadratic = quad;
            b.objective = quad;
            if (cfg.problem.theta0) {
                b.theta0 = Eigen::Map<const Vec>(cfg.problem.theta0->data(),
                                                 cfg.problem.dim);
            } else {
                b.theta0 = Vec::Zero(cfg.problem.dim);
            }
            break;
        }
        case ProblemKind::toyflow_image:
        case ProblemKind::toyflow_video:
        case ProblemKind::attention_toy: {
            toy::ConceptWorld world(cfg.losses.k_irrelevant);
            auto flow = std::make_shared<toy::ToyFlowModel>(world, toy::FlowArch{},
                                                            seeds.flow);
            flow->pretrain(seeds.pretrain);
            toy::AttnVocab vocab;
            vocab.k_irrelevant = cfg.losses.k_irrelevant;
            auto attn = std::make_shared<toy::ToyAttention>(vocab, toy::AttnArch{},
                                                            seeds.attention);
            toy::LossWeights weights;
            weights.gamma1 = cfg.losses.gamma1;
            weights.gamma2 = cfg.losses.gamma2;
            weights.eta = cfg.losses.eta;
            weights.tau = cfg.losses.tau;
            toy::TaskShape shape;

            b.flow = flow;
            if (cfg.problem.kind == ProblemKind::toyflow_video) {
                auto video = toy::make_video_task(flow, attn, weights, shape,
                                                  cfg.problem.frames, seeds.banks);
                b.video_task = video;
                b.objective = video;
                b.theta0 = video->initial_params(seeds.theta0);
            } else {
                auto image = toy::make_image_task(flow, attn, weights, shape,
                                                  seeds.banks);
                b.image_task = image;
                if (cfg.problem.kind == ProblemKind::attention_toy) {
                    auto narrowed = std::make_shared<toy::AttentionOnlyTask>(image);
                    b.objective = narrowed;
                    b.theta0 = narrowed->initial_params(seeds.theta0);
                } else {
                    b.objective = image;
                    b.theta0 = image->initial_params(seeds.theta0);
                }
            }
            break;
        }
    }
    return b;
}

inline std::int64_t unix_ms_now() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

struct RunArtifacts {
    RunManifest manifest;
    RunOutcome outcome;
    std::string dir;
};

/// Execute one configured run and persist trace, final parameters,
/// gradients (when instrumented), and the manifest under out_dir.
inline RunArtifacts run_to_dir(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    RunArtifacts art;
    art.dir = out_dir;
    RunManifest& m = art.manifest;
    m.config = cfg;
    m.hash = config_hash(cfg);
    m.started_unix_ms = unix_ms_now();

    ProblemBundle bundle = build_problem(cfg);
    ObjectivePair obj(bundle.objective);
    art.outcome = run_solver(cfg.solver_settings(), obj, bundle.theta0);

    m.finished_unix_ms = unix_ms_now();
    m.counts = art.outcome.trace.counts;
    m.final_loss_e = art.outcome.trace.final_loss_e;
    m.final_loss_p = art.outcome.trace.final_loss_p;
    if (!art.outcome.ok()) {
        m.status = "failed";
        m.failure_message = art.outcome.failure->message;
        m.failure_step = art.outcome.failure->step;
    }

    m.trace_path = (fs::path(out_dir) / "trace.tsv").string();
    m.params_path = (fs::path(out_dir) / "params.tsv").string();
    write_file(m.trace_path, trace_to_text(art.outcome.trace));
    write_file(m.params_path, params_to_text(art.outcome.final_params));
    if (art.outcome.trace.instrumented()) {
        m.gradients_path = (fs::path(out_dir) / "grads.tsv").string();
        write_file(m.gradients_path, gradients_to_text(art.outcome.trace));
    }
    write_file((fs::path(out_dir) / "manifest.json").string(),
               manifest_to_json(m).dump(2) + "\n");
    return art;
}

struct GridEntry {
    std::string name;
    RunConfig config;
};

struct GridResult {
    std::string name;
    std::string dir;
    bool ok = false;
    std::string error;
};

/// Run a batch of configs, each in its own subdirectory of out_root, using
/// up to `workers` threads. One failing run never aborts the others; its
/// entry reports the error instead.
inline std::vector<GridResult> run_grid(const std::vector<GridEntry>& entries,
                                        const std::string& out_root,
                                        unsigned workers = 0) {
    if (workers == 0)
        workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(
                                              1, entries.size())));
    std::vector<GridResult> results(entries.size());
    std::mutex next_mutex;
    std::size_t next = 0;

    auto worker = [&]() {
        for (;;) {
            std::size_t idx;
            {
                std::lock_guard<std::mutex> lock(next_mutex);
                if (next >= entries.size()) return;
                idx = next++;
            }
            GridResult& res = results[idx];
            res.name = entries[idx].name;
            res.dir = (fs::path(out_root) / entries[idx].name).string();
            try {
                RunArtifacts art = run_to_dir(entries[idx].config, res.dir);
                res.ok = art.outcome.ok();
                if (!res.ok) res.error = art.outcome.failure->message;
            } catch (const std::exception& e) {
                res.ok = false;
                res.error = e.what();
            }
        }
    };

    std::vector<std::thread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return results;
}

/// Load every *.json config in a directory, sorted by filename.
inline std::vector<GridEntry> load_config_dir(const std::string& dir) {
    std::vector<GridEntry> entries;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
        entries.push_back({f.stem().string(), load_config(f.string())});
    if (entries.empty()) throw ConfigError("no *.json configs in " + dir);
    return entries;
}

/// Generation-quality summary of one persisted run.
struct SummaryRow {
    std::string name;
    bool complete = false;       // generative metrics available
    std::string note;
    double acc_target = 0.0;
    double acc_irrelevant = 0.0;
    double balance = 0.0;        // acc_irrelevant - acc_target
    double final_loss_e = 0.0;
    double final_loss_p = 0.0;
    long steps = 0;
    std::int64_t grad_evals = 0;
};

inline constexpr int kSummarySamples = 150;
inline constexpr int kSummarySampleSteps = 32;
inline constexpr double kSummaryRadius = 0.4;

/// Rebuild the problem of a persisted run and score the final parameters
/// with fresh generation samples. Quadratic runs have no generative side
/// and come back marked incomplete.
inline SummaryRow summarize_run(const std::string& manifest_path) {
    SummaryRow row;
    const json j = json::parse(read_file(manifest_path));
    RunManifest m = manifest_from_json(j);
    row.name = fs::path(manifest_path).parent_path().filename().string();
    row.final_loss_e = m.final_loss_e;
    row.final_loss_p = m.final_loss_p;
    row.grad_evals = m.counts.grad;
    row.steps = m.config.max_steps;

    if (m.status != "ok") {
        row.note = "run failed: " + m.failure_message;
        return row;
    }
    if (m.config.problem.kind != ProblemKind::toyflow_image &&
        m.config.problem.kind != ProblemKind::toyflow_video) {
        row.note = "no generative model for this problem kind";
        return row;
    }

    ProblemBundle bundle = build_problem(m.config);
    Vec params = parse_params_text(read_file(m.params_path));
    if (params.size() != bundle.objective->dim()) {
        row.note = "parameter file does not match the rebuilt problem";
        return row;
    }
    SeedPlan seeds(m.config.seed);
    toy::FlowLora lora = bundle.flow->unpack(params.head(bundle.flow->lora_dim()));
    toy::AccuracyReport rep = toy::measure_accuracy(
        *bundle.flow, lora, kSummarySamples, kSummarySampleSteps, kSummaryRadius,
        seeds.sampling);
    row.complete = true;
    row.acc_target = rep.acc_target;
    row.acc_irrelevant = rep.acc_irrelevant;
    row.balance = rep.balance();
    return row;
}

}  // namespace gradsurg::bench
