#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "gradsurg/analysis.hpp"
#include "gradsurg/config.hpp"
#include "gradsurg/quadratics.hpp"
#include "gradsurg/runner.hpp"
#include "gradsurg/solver.hpp"
#include "gradsurg/tasks.hpp"
#include "gradsurg/trace_io.hpp"

namespace gradsurg::verify {

// The acceptance suite: one callable check per criterion, each returning a
// pass flag and a human-readable detail line. Tolerances and thresholds are
// pinned here, in code.

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    double seconds = 0.0;
    std::string detail;
};

using Emit = std::function<void(const CriterionResult&)>;

namespace detail {

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

// ---- shared problem builders -------------------------------------------

inline SolverSettings quad_settings(SolverKind kind, long steps, double alpha,
                                    double eps,
                                    Instrumentation instr = Instrumentation::light) {
    SolverSettings s;
    s.kind = kind;
    s.surgery.alpha = Schedule::constant(alpha);
    s.surgery.beta = Schedule::constant(0.5);
    s.surgery.epsilon = Schedule::constant(eps);
    s.surgery.max_steps = steps;
    s.instrumentation = instr;
    return s;
}

struct ToyProblem {
    std::shared_ptr<toy::ToyFlowModel> flow;
    std::shared_ptr<toy::ToyAttention> attn;
    std::shared_ptr<toy::ImageUnlearnTask> image;
    Vec theta0;
};

inline ToyProblem build_toy(std::uint64_t seed, const toy::LossWeights& weights,
                            const toy::TaskShape& shape, bool pretrain = true) {
    bench::SeedPlan seeds(seed);
    toy::ConceptWorld world(3);
    ToyProblem p;
    p.flow = std::make_shared<toy::ToyFlowModel>(world, toy::FlowArch{}, seeds.flow);
    if (pretrain) p.flow->pretrain(seeds.pretrain);
    toy::AttnVocab vocab;
    p.attn = std::make_shared<toy::ToyAttention>(vocab, toy::AttnArch{},
                                                 seeds.attention);
    p.image = toy::make_image_task(p.flow, p.attn, weights, shape, seeds.banks);
    p.theta0 = p.image->initial_params(seeds.theta0);
    return p;
}

// Hyperparameters of the toy unlearning comparison. Every solver shares the
// same step size and budget; the tolerance only matters to the surgery
// solvers. The erase-depth radius is the benchmark's accuracy radius.
struct AblationSetup {
    double alpha = 1e-3;
    double beta = 0.1;
    double epsilon = 0.05;
    long steps = 1000;
    int accuracy_samples = 300;
    int sample_steps = 32;
    double radius = 0.8;
};

inline SolverSettings ablation_settings(const AblationSetup& a, SolverKind kind,
                                        double lambda_fixed = 0.0) {
    SolverSettings s;
    s.kind = kind;
    s.lambda_fixed = lambda_fixed;
    s.surgery.alpha = Schedule::constant(a.alpha);
    s.surgery.beta = Schedule::constant(a.beta);
    s.surgery.epsilon = Schedule::constant(a.epsilon);
    s.surgery.max_steps = a.steps;
    return s;
}

inline double ablation_balance(const ToyProblem& p, const AblationSetup& a,
                               SolverKind kind, double lambda_fixed,
                               std::uint64_t sample_seed) {
    ObjectivePair obj(p.image);
    RunOutcome out =
        run_solver(ablation_settings(a, kind, lambda_fixed), obj,
                   p.theta0);
    if (!out.ok()) return -1e9;
    toy::FlowLora lora =
        p.flow->unpack(out.final_params.head(p.flow->lora_dim()));
    Rng rng(sample_seed);
    toy::AccuracyReport rep = toy::measure_accuracy(
        *p.flow, lora, a.accuracy_samples, a.sample_steps, a.radius, rng);
    return rep.balance();
}

}  // namespace detail

// ---- criterion 1 + 2: closed form against the numeric oracles ----------

inline CriterionResult check_closed_form_vs_oracle() {
    detail::Timer timer;
    CriterionResult res{1, "closed-form lambda/direction vs numeric oracle"};
    Rng rng(90001);
    const double eps_choices[] = {0.0, 0.1, 1.0};
    double worst_lambda = 0.0, worst_dir = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto dim = static_cast<Eigen::Index>(2 + rng.below(63));
        GradientPair g(rng.normal_vec(dim), rng.normal_vec(dim));
        const double eps = eps_choices[rng.below(3)];
        analysis::QpSolution sol = analysis::qp_oracle(g, eps);
        const double lam = std::max(0.0, closed_form_lambda(g, eps));
        const Vec dir = explicit_direction(g, eps);
        worst_lambda = std::max(worst_lambda, std::abs(sol.lambda - lam));
        worst_dir = std::max(worst_dir, (sol.direction - dir).norm());
    }
    const double secs = timer.seconds();
    res.passed = worst_lambda < 1e-6 && worst_dir < 1e-6 && secs < 10.0;
    res.seconds = secs;
    res.detail = "1000 instances, max |lambda-oracle| = " + detail::fmt(worst_lambda) +
                 ", max ||d-oracle|| = " + detail::fmt(worst_dir) + ", " +
                 detail::fmt(secs) + "s (budget 10s)";
    return res;
}

inline CriterionResult check_active_constraint_identity() {
    detail::Timer timer;
    CriterionResult res{2, "active-constraint identity"};
    Rng rng(90001);  // same instance set as criterion 1
    const double eps_choices[] = {0.0, 0.1, 1.0};
    double worst = 0.0;
    bool bitwise_ok = true;
    for (int i = 0; i < 1000; ++i) {
        const auto dim = static_cast<Eigen::Index>(2 + rng.below(63));
        GradientPair g(rng.normal_vec(dim), rng.normal_vec(dim));
        const double eps = eps_choices[rng.below(3)];
        const double lam = closed_form_lambda(g, eps);
        const Vec dir = explicit_direction(g, eps);
        if (lam > 0.0) {
            worst = std::max(worst, std::abs(g.p.dot(dir) + eps));
        } else if (dir != g.e) {
            bitwise_ok = false;
        }
    }
    res.passed = worst < 1e-10 && bitwise_ok;
    res.seconds = timer.seconds();
    res.detail = "max |g_p . d* + eps| = " + detail::fmt(worst) +
                 (bitwise_ok ? ", inactive branch bitwise" : ", BITWISE VIOLATION");
    return res;
}

// ---- criterion 3 + 7: utility bound and per-step norm bound -------------

struct QuadRunSet {
    std::vector<double> epsilons;
    std::vector<RunOutcome> runs;
    std::shared_ptr<QuadraticPair> quad;
    double fitted_G = 0.0;
};

inline QuadRunSet make_utility_runs(long steps = 10000) {
    QuadRunSet set;
    set.quad = QuadraticPair::conflicting(2);
    Rng rng(555);
    set.fitted_G =
        analysis::fit_constants(*set.quad, Vec::Zero(2), 2.0, 300, rng).smoothness;
    set.epsilons = {0.0, 0.01, 0.1};
    Vec theta0 = set.quad->center_p();  // start at the preservation optimum
    for (double eps : set.epsilons) {
        ObjectivePair obj(set.quad);
        set.runs.push_back(run_solver(
            detail::quad_settings(SolverKind::explicit_surgery, steps, 0.01, eps),
            obj, theta0));
    }
    return set;
}

inline CriterionResult check_utility_bound(const QuadRunSet& set) {
    detail::Timer timer;
    CriterionResult res{3, "utility degradation bound"};
    std::string detail_str;
    bool ok = true;
    for (std::size_t i = 0; i < set.runs.size(); ++i) {
        auto check = analysis::utility_bound_check(
            set.runs[i].trace, Schedule::constant(0.01),
            Schedule::constant(set.epsilons[i]), set.fitted_G, 2.0);
        ok = ok && check.passed && set.runs[i].ok();
        detail_str += "eps=" + detail::fmt(set.epsilons[i]) +
                      (check.passed ? " holds; " : " VIOLATED; ");
    }

    // negative control: plain descent on the erasure loss must break it
    ObjectivePair obj(set.quad);
    SolverSettings plain =
        detail::quad_settings(SolverKind::linear, 10000, 0.01, 0.01);
    plain.lambda_fixed = 0.0;
    RunOutcome control = run_solver(plain, obj, set.quad->center_p());
    auto control_check = analysis::utility_bound_check(
        control.trace, Schedule::constant(0.01), Schedule::constant(0.01),
        set.fitted_G, 2.0);
    ok = ok && !control_check.passed;
    detail_str += control_check.passed ? "negative control NOT violated"
                                       : "negative control violated as expected";

    const double secs = timer.seconds();
    res.passed = ok && secs < 30.0;
    res.seconds = secs;
    res.detail = detail_str + ", " + detail::fmt(secs) + "s (budget 30s)";
    return res;
}

inline CriterionResult check_norm_bound(const QuadRunSet& set) {
    detail::Timer timer;
    CriterionResult res{7, "per-step direction norm bound"};
    bool ok = true;
    std::string detail_str;
    for (std::size_t i = 0; i < set.runs.size(); ++i) {
        auto check = analysis::norm_bound_check(
            set.runs[i].trace, Schedule::constant(0.01),
            Schedule::constant(set.epsilons[i]), set.fitted_G);
        ok = ok && check.passed && !check.skipped;
        detail_str += "eps=" + detail::fmt(set.epsilons[i]) + " " +
                      (check.passed ? "holds; " : ("fails (" + check.detail + "); "));
    }
    res.passed = ok;
    res.seconds = timer.seconds();
    res.detail = detail_str + "fitted G = " + detail::fmt(set.fitted_G);
    return res;
}

// ---- criterion 4: dual-gap decay under the summable schedules -----------

inline bench::RunConfig theorem1_config() {
    bench::RunConfig cfg;
    cfg.solver = SolverKind::implicit_surgery;
    cfg.problem.kind = bench::ProblemKind::quadratic;
    cfg.problem.dim = 2;
    cfg.problem.preset = "conflicting";
    cfg.problem.theta0 = std::vector<double>{-0.8, 0.9};
    cfg.alpha = Schedule::power(0.05, 1.01);
    cfg.epsilon = Schedule::power(0.05, 1.01);
    cfg.beta = Schedule::power(4.0, 1.01 + 1.0 / 3.0);  // beta/alpha ~ t^(-1/3)
    cfg.max_steps = 10000;
    cfg.seed = 7001;
    cfg.instrumentation = Instrumentation::full;
    return cfg;
}

inline CriterionResult check_dual_gap() {
    detail::Timer timer;
    CriterionResult res{4, "dual gap decay (implicit vs optimal multiplier)"};
    bench::RunConfig cfg = theorem1_config();
    bench::ProblemBundle bundle = bench::build_problem(cfg);
    ObjectivePair obj(bundle.objective);
    RunOutcome out = run_solver(cfg.solver_settings(), obj, bundle.theta0);
    if (!out.ok()) {
        res.detail = "run failed: " + out.failure->message;
        return res;
    }
    auto check = analysis::dual_gap_check(out.trace, cfg.epsilon, 100, 10000, -0.2);
    res.passed = check.passed;
    res.seconds = timer.seconds();
    res.detail = check.detail;
    return res;
}

// ---- criterion 5: convex convergence rate --------------------------------

inline CriterionResult check_convex_rate() {
    detail::Timer timer;
    CriterionResult res{5, "convex composite rate"};
    auto quad = QuadraticPair::conflicting(2);
    SolverSettings s =
        detail::quad_settings(SolverKind::explicit_surgery, 10000, 0.05, 0.0);
    ObjectivePair obj(quad);
    Vec theta0(2);
    theta0 << -0.8, 0.9;
    RunOutcome out = run_solver(s, obj, theta0);
    if (!out.ok()) {
        res.detail = "run failed: " + out.failure->message;
        return res;
    }
    const double lambda_bar = out.trace.rows.back().lambda;
    const double cstar = quad->composite_min(lambda_bar);
    auto check = analysis::convex_rate_check(out.trace, lambda_bar, cstar, -0.8);
    res.passed = check.passed;
    res.seconds = timer.seconds();
    res.detail = check.detail + ", lambda_bar = " + detail::fmt(lambda_bar);
    return res;
}

// ---- criterion 6: stationarity rate on the non-convex toy ---------------

inline CriterionResult check_stationarity_rate() {
    detail::Timer timer;
    CriterionResult res{6, "running-min stationarity on non-convex pair"};
    detail::ToyProblem p = detail::build_toy(8101, toy::LossWeights{}, toy::TaskShape{});
    SolverSettings s;
    s.kind = SolverKind::implicit_surgery;
    s.surgery.alpha = Schedule::constant(5e-3);
    s.surgery.beta = Schedule::constant(0.1);
    s.surgery.epsilon = Schedule::power(0.01, 1.01);
    s.surgery.max_steps = 10000;
    s.instrumentation = Instrumentation::full;
    ObjectivePair obj(p.image);
    RunOutcome out = run_solver(s, obj, p.theta0);
    if (!out.ok()) {
        res.detail = "run failed: " + out.failure->message;
        return res;
    }
    auto check = analysis::stationarity_rate_check(out.trace, 100, 10000);
    res.passed = check.passed;
    res.seconds = timer.seconds();
    res.detail = check.detail;
    return res;
}

// ---- criterion 8: oracle-call efficiency ---------------------------------

inline CriterionResult check_efficiency() {
    detail::Timer timer;
    CriterionResult res{8, "single-backward efficiency of the implicit solver"};
    auto quad = QuadraticPair::conflicting(2);
    ObjectivePair imp(quad), exp(quad);
    Vec x0 = Vec::Zero(2);
    run_solver(detail::quad_settings(SolverKind::implicit_surgery, 1000, 0.01, 0.01),
               imp, x0);
    run_solver(detail::quad_settings(SolverKind::explicit_surgery, 1000, 0.01, 0.01),
               exp, x0);
    res.passed = imp.counts().grad == 1000 && exp.counts().grad == 2000;
    res.seconds = timer.seconds();
    res.detail = "implicit " + std::to_string(imp.counts().grad) +
                 " backward passes / 1000 steps, explicit " +
                 std::to_string(exp.counts().grad) + " / 1000 steps";
    return res;
}

// ---- criterion 9: gradient correctness of the toy losses ----------------

inline CriterionResult check_loss_gradients() {
    detail::Timer timer;
    CriterionResult res{9, "finite-difference checks on all toy losses"};
    toy::TaskShape shape;
    shape.esd_probes = 8;
    shape.retention_probes_per_concept = 4;
    shape.attention_probes = 2;
    detail::ToyProblem p = detail::build_toy(9301, toy::LossWeights{}, shape);

    bench::SeedPlan vseeds(9302);
    toy::ConceptWorld world(3);
    auto vflow = std::make_shared<toy::ToyFlowModel>(world, toy::FlowArch{}, vseeds.flow);
    toy::AttnVocab vocab;
    auto vattn =
        std::make_shared<toy::ToyAttention>(vocab, toy::AttnArch{}, vseeds.attention);
    auto video =
        toy::make_video_task(vflow, vattn, toy::LossWeights{}, shape, 3, vseeds.banks);

    const auto& task = *p.image;
    using LossFn = std::function<double(const Vec&, Vec*)>;
    struct Named {
        std::string name;
        Eigen::Index dim;
        LossFn fn;
    };
    const Eigen::Index di = task.dim();
    const Eigen::Index dv = video->dim();
    std::vector<Named> losses = {
        {"erasure-velocity", di,
         [&](const Vec& x, Vec* g) { return task.erasure_loss(x, g); }},
        {"attention-penalty", di,
         [&](const Vec& x, Vec* g) { return task.attention_penalty(x, g); }},
        {"retention", di,
         [&](const Vec& x, Vec* g) { return task.retention_loss(x, g); }},
        {"reverse-contrastive", di,
         [&](const Vec& x, Vec* g) { return task.contrastive_loss(x, g); }},
        {"composite-erasure", di,
         [&](const Vec& x, Vec* g) {
             if (g) *g = task.gradient_e(x);
             return task.value_e(x);
         }},
        {"composite-preservation", di,
         [&](const Vec& x, Vec* g) {
             if (g) *g = task.gradient_p(x);
             return task.value_p(x);
         }},
        {"video-erasure", dv,
         [&](const Vec& x, Vec* g) {
             if (g) *g = video->gradient_e(x);
             return video->value_e(x);
         }},
        {"video-preservation", dv,
         [&](const Vec& x, Vec* g) {
             if (g) *g = video->gradient_p(x);
             return video->value_p(x);
         }},
        {"volumetric-attention", dv,
         [&](const Vec& x, Vec* g) {
             const double inv = 1.0 / video->frame_count();
             double total = 0.0;
             for (int f = 0; f < video->frame_count(); ++f)
                 total += video->frame(f).attention_penalty(x, g, inv);
             return total * inv;
         }},
    };

    bool ok = true;
    std::string failing;
    double worst = 0.0;
    for (const Named& loss : losses) {
        Rng rng(9400 + static_cast<std::uint64_t>(&loss - losses.data()));
        for (int probe = 0; probe < 100; ++probe) {
            Vec params = rng.normal_vec(loss.dim, 0.05);
            Vec grad = Vec::Zero(loss.dim);
            loss.fn(params, &grad);
            // spot-check six random coordinates with central differences
            for (int c = 0; c < 6; ++c) {
                const auto idx =
                    static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(loss.dim)));
                const double h = 1e-6 * (1.0 + std::abs(params[idx]));
                Vec probe_vec = params;
                probe_vec[idx] = params[idx] + h;
                const double fp = loss.fn(probe_vec, nullptr);
                probe_vec[idx] = params[idx] - h;
                const double fm = loss.fn(probe_vec, nullptr);
                const double fd = (fp - fm) / (2.0 * h);
                const double rel = std::abs(grad[idx] - fd) /
                                   std::max({1.0, std::abs(fd), std::abs(grad[idx])});
                worst = std::max(worst, rel);
                if (rel >= 1e-5) {
                    ok = false;
                    if (failing.empty()) failing = loss.name;
                }
            }
        }
    }
    res.passed = ok;
    res.seconds = timer.seconds();
    res.detail = "9 losses x 100 probes, worst relative error " + detail::fmt(worst) +
                 (ok ? "" : " (first failing: " + failing + ")");
    return res;
}

// ---- criterion 10: reverse-contrastive identities ------------------------

inline CriterionResult check_contrastive_identities() {
    detail::Timer timer;
    CriterionResult res{10, "reverse-contrastive identities"};
    Rng rng(10001);
    bool ok = true;
    double worst = 0.0;
    auto track = [&](double err) {
        worst = std::max(worst, err);
        if (err >= 1e-9) ok = false;
    };
    for (int trial = 0; trial < 100; ++trial) {
        Vec f = rng.normal_vec(8);
        f /= f.norm();

        toy::ConceptFeatures equalK;
        equalK.tau = 0.07;
        equalK.target = f;
        equalK.synonym = f;
        equalK.irrelevant = {f, f, f};
        track(std::abs(toy::reverse_contrastive_loss(equalK) - std::log(3.0)));

        toy::ConceptFeatures zero;
        zero.tau = 0.07;
        zero.target = f;
        zero.synonym = f;
        zero.irrelevant = {f};
        track(std::abs(toy::reverse_contrastive_loss(zero)));

        toy::ConceptFeatures random;
        random.tau = 0.07;
        random.target = f;
        Vec syn = rng.normal_vec(8);
        random.synonym = syn / syn.norm();
        for (int k = 0; k < 4; ++k) {
            Vec irr = rng.normal_vec(8);
            random.irrelevant.push_back(irr / irr.norm());
        }
        const double base = toy::reverse_contrastive_loss(random);
        toy::ConceptFeatures perm = random;
        perm.irrelevant = {random.irrelevant[3], random.irrelevant[1],
                           random.irrelevant[0], random.irrelevant[2]};
        track(std::abs(toy::reverse_contrastive_loss(perm) - base));
    }
    res.passed = ok;
    res.seconds = timer.seconds();
    res.detail = "log K, zero and permutation identities, worst error " +
                 detail::fmt(worst);
    return res;
}

// ---- criterion 11: solver ablation ordering ------------------------------

struct AblationCell {
    std::string solver;
    double balance = 0.0;
};

struct AblationTable {
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<AblationCell>> rows;  // per seed
};

inline AblationTable run_ablation(const detail::AblationSetup& setup,
                                  const std::vector<std::uint64_t>& seeds) {
    AblationTable table;
    table.seeds = seeds;
    for (std::uint64_t seed : seeds) {
        detail::ToyProblem p =
            detail::build_toy(seed, toy::LossWeights{}, toy::TaskShape{});
        const std::uint64_t sample_seed = seed * 977 + 13;
        std::vector<AblationCell> row;
        row.push_back({"ours", detail::ablation_balance(p, setup,
                                                        SolverKind::implicit_surgery,
                                                        0.0, sample_seed)});
        row.push_back({"pcgrad", detail::ablation_balance(p, setup, SolverKind::pcgrad,
                                                          0.0, sample_seed)});
        row.push_back({"mgda", detail::ablation_balance(p, setup, SolverKind::mgda,
                                                        0.0, sample_seed)});
        row.push_back({"linear-0.1",
                       detail::ablation_balance(p, setup, SolverKind::linear, 0.1,
                                                sample_seed)});
        row.push_back({"linear-10",
                       detail::ablation_balance(p, setup, SolverKind::linear, 10.0,
                                                sample_seed)});
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline CriterionResult check_ablation_ordering() {
    detail::Timer timer;
    CriterionResult res{11, "solver ablation ordering on toy unlearning"};
    detail::AblationSetup setup;
    AblationTable table = run_ablation(setup, {1, 2, 3});

    std::string detail_str;
    bool ok = true;
    for (std::size_t b = 1; b < table.rows.front().size(); ++b) {
        int wins = 0;
        for (const auto& row : table.rows)
            if (row[0].balance > row[b].balance) ++wins;
        detail_str += table.rows.front()[b].solver + " " + std::to_string(wins) + "/3; ";
        if (wins < 2) ok = false;  // majority vote per opponent
    }
    detail_str += "balances(seed1):";
    for (const auto& cell : table.rows.front())
        detail_str += " " + cell.solver + "=" + detail::fmt(cell.balance);

    const double secs = timer.seconds();
    res.passed = ok && secs < 300.0;
    res.seconds = secs;
    res.detail = detail_str + ", " + detail::fmt(secs) + "s (budget 300s)";
    return res;
}

// ---- criterion 12: anchored video objectives -----------------------------

inline CriterionResult check_video_reduction_and_erasure() {
    detail::Timer timer;
    CriterionResult res{12, "anchored video reduction and per-frame erasure"};
    bool ok = true;
    std::string detail_str;

    // (a) one-frame video == image objective, bitwise
    {
        Rng root(12001);
        Rng r_flow = root.split(), r_attn = root.split(), r_banks = root.split();
        toy::ConceptWorld world(3);
        auto flow = std::make_shared<toy::ToyFlowModel>(world, toy::FlowArch{}, r_flow);
        auto attn =
            std::make_shared<toy::ToyAttention>(toy::AttnVocab{}, toy::AttnArch{}, r_attn);
        toy::TaskShape shape;
        Rng video_stream = r_banks;
        auto video = toy::make_video_task(flow, attn, toy::LossWeights{}, shape, 1,
                                          video_stream);
        Rng mirror = r_banks;
        Rng frame_stream = mirror.split();
        auto image =
            toy::make_image_task(flow, attn, toy::LossWeights{}, shape, frame_stream);
        Rng probe(12002);
        bool bitwise = true;
        for (int i = 0; i < 10; ++i) {
            Vec params = probe.normal_vec(video->dim(), 0.08);
            bitwise = bitwise && video->value_e(params) == image->value_e(params);
            bitwise = bitwise && video->value_p(params) == image->value_p(params);
            bitwise = bitwise &&
                      (video->gradient_e(params) - image->gradient_e(params)).norm() == 0.0;
            bitwise = bitwise &&
                      (video->gradient_p(params) - image->gradient_p(params)).norm() == 0.0;
        }
        ok = ok && bitwise;
        detail_str += bitwise ? "T=1 reduction bitwise; " : "T=1 reduction BROKEN; ";

        // volumetric penalty is exactly the frame mean
        Rng r_banks4 = root.split();
        auto video4 = toy::make_video_task(flow, attn, toy::LossWeights{}, shape, 4,
                                           r_banks4);
        Vec params = probe.normal_vec(video4->dim(), 0.08);
        double mean = 0.0;
        for (int f = 0; f < 4; ++f) mean += video4->frame(f).attention_penalty(params);
        mean /= 4.0;
        const bool mean_ok = video4->volumetric_attention_penalty(params) == mean;
        ok = ok && mean_ok;
        detail_str += mean_ok ? "volumetric mean exact; " : "volumetric mean WRONG; ";
    }

    // (b) erase on an 8-frame volume: target accuracy drops on every frame
    {
        bench::RunConfig cfg;
        cfg.solver = SolverKind::implicit_surgery;
        cfg.problem.kind = bench::ProblemKind::toyflow_video;
        cfg.problem.frames = 8;
        cfg.seed = 12010;
        cfg.alpha = Schedule::constant(5e-3);
        cfg.beta = Schedule::constant(0.1);
        cfg.epsilon = Schedule::constant(0.01);
        cfg.max_steps = 800;
        bench::ProblemBundle bundle = bench::build_problem(cfg);
        ObjectivePair obj(bundle.objective);
        RunOutcome out = run_solver(cfg.solver_settings(), obj, bundle.theta0);
        if (!out.ok()) {
            res.detail = "video run failed: " + out.failure->message;
            return res;
        }
        toy::FlowLora before = bundle.flow->unpack(bundle.flow->zero_lora());
        toy::FlowLora after =
            bundle.flow->unpack(out.final_params.head(bundle.flow->lora_dim()));
        int frames_dropped = 0;
        for (int f = 0; f < cfg.problem.frames; ++f) {
            const std::uint64_t frame_seed = 12100 + static_cast<std::uint64_t>(f);
            Rng pre_rng(frame_seed), post_rng(frame_seed);
            toy::AccuracyReport pre = toy::measure_accuracy(*bundle.flow, before, 100,
                                                            32, 0.4, pre_rng);
            toy::AccuracyReport post = toy::measure_accuracy(*bundle.flow, after, 100,
                                                             32, 0.4, post_rng);
            if (post.acc_target < pre.acc_target) ++frames_dropped;
        }
        ok = ok && frames_dropped == cfg.problem.frames;
        detail_str += "target accuracy dropped on " + std::to_string(frames_dropped) +
                      "/8 frames";
    }

    res.passed = ok;
    res.seconds = timer.seconds();
    res.detail = detail_str;
    return res;
}

// ---- criterion 13: byte-identical reproducibility ------------------------

inline CriterionResult check_determinism() {
    detail::Timer timer;
    CriterionResult res{13, "byte-identical reproducibility"};
    bool ok = true;
    std::string detail_str;

    // the instrumented theorem-1 run, serialized twice
    {
        bench::RunConfig cfg = theorem1_config();
        cfg.max_steps = 2000;
        auto once = [&]() {
            bench::ProblemBundle bundle = bench::build_problem(cfg);
            ObjectivePair obj(bundle.objective);
            RunOutcome out = run_solver(cfg.solver_settings(), obj, bundle.theta0);
            return bench::trace_to_text(out.trace) +
                   bench::params_to_text(out.final_params) +
                   bench::gradients_to_text(out.trace);
        };
        const bool same = once() == once();
        ok = ok && same;
        detail_str += same ? "quadratic trace identical; " : "quadratic trace DIFFERS; ";
    }

    // one toy unlearning cell, rebuilt from scratch twice
    {
        detail::AblationSetup setup;
        setup.steps = 300;
        auto once = [&]() {
            detail::ToyProblem p =
                detail::build_toy(1, toy::LossWeights{}, toy::TaskShape{});
            ObjectivePair obj(p.image);
            RunOutcome out =
                run_solver(detail::ablation_settings(setup, SolverKind::implicit_surgery),
                           obj, p.theta0);
            return bench::trace_to_text(out.trace) +
                   bench::params_to_text(out.final_params);
        };
        const bool same = once() == once();
        ok = ok && same;
        detail_str += same ? "toy trace identical" : "toy trace DIFFERS";
    }

    res.passed = ok;
    res.seconds = timer.seconds();
    res.detail = detail_str;
    return res;
}

// ---- driver ---------------------------------------------------------------

inline std::vector<CriterionResult> run_acceptance(const Emit& emit = {}) {
    std::vector<CriterionResult> results;
    auto push = [&](CriterionResult r) {
        if (emit) emit(r);
        results.push_back(std::move(r));
    };

    push(check_closed_form_vs_oracle());
    push(check_active_constraint_identity());
    QuadRunSet set = make_utility_runs();
    push(check_utility_bound(set));
    push(check_dual_gap());
    push(check_convex_rate());
    push(check_stationarity_rate());
    push(check_norm_bound(set));
    push(check_efficiency());
    push(check_loss_gradients());
    push(check_contrastive_identities());
    push(check_ablation_ordering());
    push(check_video_reduction_and_erasure());
    push(check_determinism());

    std::sort(results.begin(), results.end(),
              [](const CriterionResult& a, const CriterionResult& b) {
                  return a.id < b.id;
              });
    return results;
}

inline bool all_passed(const std::vector<CriterionResult>& results) {
    for (const auto& r : results)
        if (!r.passed) return false;
    return true;
}

}  // namespace gradsurg::verify
