#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradsurg/schedule.hpp"
#include "gradsurg/solver.hpp"
#include "gradsurg/vec.hpp"

namespace gradsurg::bench {

using nlohmann::json;

inline constexpr int kConfigVersion = 1;

enum class ProblemKind { quadratic, toyflow_image, toyflow_video, attention_toy };

inline std::string to_string(ProblemKind k) {
    switch (k) {
        case ProblemKind::quadratic: return "quadratic";
        case ProblemKind::toyflow_image: return "toyflow-image";
        case ProblemKind::toyflow_video: return "toyflow-video";
        case ProblemKind::attention_toy: return "attention-toy";
    }
    return "?";
}

struct ProblemConfig {
    ProblemKind kind = ProblemKind::quadratic;
    int dim = 2;                       // quadratic only
    std::string preset = "conflicting";  // conflicting | random
    int frames = 8;                    // video only
    std::optional<std::vector<double>> theta0;  // quadratic start point

    bool operator==(const ProblemConfig&) const = default;
};

struct LossConfig {
    double gamma1 = 0.01;
    double gamma2 = 1.0;
    double eta = 2.0;
    double tau = 0.07;
    int k_irrelevant = 3;

    bool operator==(const LossConfig&) const = default;
};

/// One experiment: solver, problem, schedules, loss weights, seed.
/// Loaded from JSON with unknown keys rejected and semantic errors named by
/// field path; a minimal file needs only solver kind, problem kind, and seed.
struct RunConfig {
    SolverKind solver = SolverKind::implicit_surgery;
    double lambda_init = 0.0;
    double lambda_fixed = 0.1;
    bool lambda_clamp = true;
    bool lookahead = false;

    ProblemConfig problem;
    Schedule alpha = Schedule::constant(1e-3);
    Schedule beta = Schedule::constant(0.1);
    Schedule epsilon = Schedule::constant(0.01);
    LossConfig losses;

    std::uint64_t seed = 0;
    long max_steps = 1000;
    Instrumentation instrumentation = Instrumentation::light;

    bool operator==(const RunConfig&) const = default;

    SolverSettings solver_settings() const {
        SolverSettings s;
        s.kind = solver;
        s.lambda_fixed = lambda_fixed;
        s.instrumentation = instrumentation;
        s.surgery.alpha = alpha;
        s.surgery.beta = beta;
        s.surgery.epsilon = epsilon;
        s.surgery.max_steps = max_steps;
        s.surgery.lambda_init = lambda_init;
        s.surgery.lambda_clamp = lambda_clamp;
        s.surgery.lookahead = lookahead;
        return s;
    }

    void validate() const {
        alpha.validate("schedules.alpha", false);
        beta.validate("schedules.beta", true);
        epsilon.validate("schedules.epsilon", true);
        if (max_steps < 1) throw ConfigError("max_steps: must be >= 1");
        if (lambda_init < 0.0) throw ConfigError("solver.lambda_init: must be >= 0");
        if (lambda_fixed < 0.0) throw ConfigError("solver.lambda_fixed: must be >= 0");
        if (losses.gamma1 < 0.0) throw ConfigError("losses.gamma1: must be >= 0");
        if (losses.gamma2 < 0.0) throw ConfigError("losses.gamma2: must be >= 0");
        if (losses.eta < 0.0) throw ConfigError("losses.eta: must be >= 0");
        if (!(losses.tau > 0.0)) throw ConfigError("losses.tau: must be > 0");
        if (losses.k_irrelevant < 1)
            throw ConfigError("losses.k_irrelevant: must be >= 1");
        if (problem.kind == ProblemKind::quadratic && problem.dim < 1)
            throw ConfigError("problem.dim: must be >= 1");
        if (problem.kind == ProblemKind::toyflow_video && problem.frames < 1)
            throw ConfigError("problem.frames: must be >= 1");
        if (problem.kind == ProblemKind::quadratic && problem.preset != "conflicting" &&
            problem.preset != "random")
            throw ConfigError("problem.preset: unknown preset '" + problem.preset + "'");
        if (problem.theta0 &&
            static_cast<int>(problem.theta0->size()) != problem.dim)
            throw ConfigError("problem.theta0: length must equal problem.dim");
    }
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::string& path,
                                const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key))
            throw ConfigError("unknown key '" + (path.empty() ? key : path + "." + key) +
                              "'");
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const T& fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("field '" + key + "': " + e.what());
    }
}

inline SolverKind parse_solver_kind(const std::string& s) {
    if (s == "explicit") return SolverKind::explicit_surgery;
    if (s == "implicit") return SolverKind::implicit_surgery;
    if (s == "linear") return SolverKind::linear;
    if (s == "pcgrad") return SolverKind::pcgrad;
    if (s == "mgda") return SolverKind::mgda;
    throw ConfigError("solver.kind: unknown solver '" + s + "'");
}

inline ProblemKind parse_problem_kind(const std::string& s) {
    if (s == "quadratic") return ProblemKind::quadratic;
    if (s == "toyflow-image") return ProblemKind::toyflow_image;
    if (s == "toyflow-video") return ProblemKind::toyflow_video;
    if (s == "attention-toy") return ProblemKind::attention_toy;
    throw ConfigError("problem.kind: unknown problem '" + s + "'");
}

inline Schedule parse_schedule(const json& obj, const std::string& path,
                               const Schedule& fallback) {
    if (obj.is_null()) return fallback;
    if (obj.is_number()) return Schedule::constant(obj.get<double>());
    if (!obj.is_object()) throw ConfigError(path + ": expected number or object");
    reject_unknown_keys(obj, path, {"kind", "base", "exponent"});
    const std::string kind = get_or<std::string>(obj, "kind", "constant");
    const double base = get_or<double>(obj, "base", fallback.base);
    if (kind == "constant") {
        if (obj.contains("exponent"))
            throw ConfigError(path + ".exponent: not valid for constant schedules");
        return Schedule::constant(base);
    }
    if (kind == "power-decay")
        return Schedule::power(base, get_or<double>(obj, "exponent", 1.0));
    throw ConfigError(path + ".kind: unknown schedule kind '" + kind + "'");
}

inline json schedule_to_json(const Schedule& s) {
    json j;
    j["kind"] = s.kind == Schedule::Kind::constant ? "constant" : "power-decay";
    j["base"] = s.base;
    if (s.kind == Schedule::Kind::power_decay) j["exponent"] = s.exponent;
    return j;
}

}  // namespace detail

/// Parse a config from JSON text. Unknown keys anywhere are errors; absent
/// optional fields take the documented defaults.
inline RunConfig parse_config(const json& root) {
    using detail::get_or;
    using detail::reject_unknown_keys;

    if (!root.is_object()) throw ConfigError("config root must be an object");
    reject_unknown_keys(root, "", {"version", "seed", "max_steps", "solver",
                                   "problem", "schedules", "losses",
                                   "instrumentation"});

    const int version = get_or<int>(root, "version", kConfigVersion);
    if (version != kConfigVersion)
        throw ConfigError("version: unsupported config version " +
                          std::to_string(version));

    RunConfig cfg;

    if (!root.contains("seed")) throw ConfigError("seed: required field missing");
    cfg.seed = root.at("seed").get<std::uint64_t>();

    cfg.max_steps = get_or<long>(root, "max_steps", cfg.max_steps);

    if (!root.contains("solver") || !root.at("solver").is_object())
        throw ConfigError("solver: required section missing");
    {
        const json& s = root.at("solver");
        reject_unknown_keys(s, "solver",
                            {"kind", "lambda_init", "lambda_fixed", "lambda_clamp",
                             "lookahead"});
        if (!s.contains("kind")) throw ConfigError("solver.kind: required");
        cfg.solver = detail::parse_solver_kind(s.at("kind").get<std::string>());
        cfg.lambda_init = get_or<double>(s, "lambda_init", cfg.lambda_init);
        cfg.lambda_fixed = get_or<double>(s, "lambda_fixed", cfg.lambda_fixed);
        cfg.lambda_clamp = get_or<bool>(s, "lambda_clamp", cfg.lambda_clamp);
        cfg.lookahead = get_or<bool>(s, "lookahead", cfg.lookahead);
    }

    if (!root.contains("problem") || !root.at("problem").is_object())
        throw ConfigError("problem: required section missing");
    {
        const json& p = root.at("problem");
        reject_unknown_keys(p, "problem", {"kind", "dim", "preset", "frames", "theta0"});
        if (!p.contains("kind")) throw ConfigError("problem.kind: required");
        cfg.problem.kind = detail::parse_problem_kind(p.at("kind").get<std::string>());
        cfg.problem.dim = get_or<int>(p, "dim", cfg.problem.dim);
        cfg.problem.preset = get_or<std::string>(p, "preset", cfg.problem.preset);
        cfg.problem.frames = get_or<int>(p, "frames", cfg.problem.frames);
        if (p.contains("theta0"))
            cfg.problem.theta0 = p.at("theta0").get<std::vector<double>>();
    }

    if (root.contains("schedules")) {
        const json& s = root.at("schedules");
        reject_unknown_keys(s, "schedules", {"alpha", "beta", "epsilon"});
        cfg.alpha = detail::parse_schedule(s.value("alpha", json()), "schedules.alpha",
                                           cfg.alpha);
        cfg.beta = detail::parse_schedule(s.value("beta", json()), "schedules.beta",
                                          cfg.beta);
        cfg.epsilon = detail::parse_schedule(s.value("epsilon", json()),
                                             "schedules.epsilon", cfg.epsilon);
    }

    if (root.contains("losses")) {
        const json& l = root.at("losses");
        reject_unknown_keys(l, "losses",
                            {"gamma1", "gamma2", "eta", "tau", "k_irrelevant"});
        cfg.losses.gamma1 = get_or<double>(l, "gamma1", cfg.losses.gamma1);
        cfg.losses.gamma2 = get_or<double>(l, "gamma2", cfg.losses.gamma2);
        cfg.losses.eta = get_or<double>(l, "eta", cfg.losses.eta);
        cfg.losses.tau = get_or<double>(l, "tau", cfg.losses.tau);
        cfg.losses.k_irrelevant = get_or<int>(l, "k_irrelevant", cfg.losses.k_irrelevant);
    }

    if (root.contains("instrumentation")) {
        const std::string i = root.at("instrumentation").get<std::string>();
        if (i == "light")
            cfg.instrumentation = Instrumentation::light;
        else if (i == "full")
            cfg.instrumentation = Instrumentation::full;
        else
            throw ConfigError("instrumentation: must be 'light' or 'full'");
    }

    cfg.validate();
    return cfg;
}

/// Canonical JSON form; load_config(serialize(c)) == c.
inline json serialize_config(const RunConfig& cfg) {
    json j;
    j["version"] = kConfigVersion;
    j["seed"] = cfg.seed;
    j["max_steps"] = cfg.max_steps;
    j["solver"] = {{"kind", to_string(cfg.solver)},
                   {"lambda_init", cfg.lambda_init},
                   {"lambda_fixed", cfg.lambda_fixed},
                   {"lambda_clamp", cfg.lambda_clamp},
                   {"lookahead", cfg.lookahead}};
    j["problem"] = {{"kind", to_string(cfg.problem.kind)},
                    {"dim", cfg.problem.dim},
                    {"preset", cfg.problem.preset},
                    {"frames", cfg.problem.frames}};
    if (cfg.problem.theta0) j["problem"]["theta0"] = *cfg.problem.theta0;
    j["schedules"] = {{"alpha", detail::schedule_to_json(cfg.alpha)},
                      {"beta", detail::schedule_to_json(cfg.beta)},
                      {"epsilon", detail::schedule_to_json(cfg.epsilon)}};
    j["losses"] = {{"gamma1", cfg.losses.gamma1},
                   {"gamma2", cfg.losses.gamma2},
                   {"eta", cfg.losses.eta},
                   {"tau", cfg.losses.tau},
                   {"k_irrelevant", cfg.losses.k_irrelevant}};
    j["instrumentation"] =
        cfg.instrumentation == Instrumentation::full ? "full" : "light";
    return j;
}

inline RunConfig load_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_config(root);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return load_config_text(buf.str());
}

/// FNV-1a hash of the canonical serialization; stable across runs and
/// platforms for equal configs.
inline std::string config_hash(const RunConfig& cfg) {
    const std::string dump = serialize_config(cfg).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace gradsurg::bench
