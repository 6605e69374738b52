#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradsurg/config.hpp"
#include "gradsurg/trace.hpp"
#include "gradsurg/vec.hpp"

namespace gradsurg::bench {

// Persistence formats, all plain text so runs diff cleanly:
//   trace.tsv     one row per step, tab separated, 17 significant digits:
//                 step loss_e loss_p lambda grad_norm_e grad_norm_p
//                 dir_norm stationarity delta
//                 (columns a run did not record hold the sentinel -1)
//   params.tsv    final parameter vector, header "value", one entry per line
//   grads.tsv     full instrumentation only: step, then the erasure and
//                 preservation gradient components ge0.. gp0..
//   manifest.json config, its hash, timestamps, oracle counts, final losses,
//                 status, and the paths of the files above

inline constexpr const char* kTraceHeader =
    "step\tloss_e\tloss_p\tlambda\tgrad_norm_e\tgrad_norm_p\tdir_norm\t"
    "stationarity\tdelta";

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

}  // namespace detail

inline std::string trace_to_text(const IterateTrace& trace) {
    std::string out = kTraceHeader;
    out.push_back('\n');
    for (const TraceRow& r : trace.rows) {
        out += std::to_string(r.step);
        for (double v : {r.loss_e, r.loss_p, r.lambda, r.grad_norm_e, r.grad_norm_p,
                         r.dir_norm, r.stationarity, r.delta}) {
            out.push_back('\t');
            out += detail::fmt(v);
        }
        out.push_back('\n');
    }
    return out;
}

inline std::vector<TraceRow> parse_trace_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader)
        throw ConfigError("trace file: bad or missing header");
    std::vector<TraceRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        TraceRow r;
        if (!(ls >> r.step >> r.loss_e >> r.loss_p >> r.lambda >> r.grad_norm_e >>
              r.grad_norm_p >> r.dir_norm >> r.stationarity >> r.delta))
            throw ConfigError("trace file: malformed row '" + line + "'");
        rows.push_back(r);
    }
    return rows;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + path);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::string params_to_text(const Vec& params) {
    std::string out = "value\n";
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        out += detail::fmt(params[i]);
        out.push_back('\n');
    }
    return out;
}

inline Vec parse_params_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "value")
        throw ConfigError("params file: bad header");
    std::vector<double> vals;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        vals.push_back(std::stod(line));
    }
    Vec v(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
    return v;
}

inline std::string gradients_to_text(const IterateTrace& trace) {
    if (trace.gradients.empty()) return {};
    const Eigen::Index d = trace.gradients.front().e.size();
    std::string out = "step";
    for (Eigen::Index i = 0; i < d; ++i) out += "\tge" + std::to_string(i);
    for (Eigen::Index i = 0; i < d; ++i) out += "\tgp" + std::to_string(i);
    out.push_back('\n');
    for (std::size_t s = 0; s < trace.gradients.size(); ++s) {
        out += std::to_string(trace.rows[s].step);
        const GradientPair& g = trace.gradients[s];
        for (Eigen::Index i = 0; i < d; ++i) {
            out.push_back('\t');
            out += detail::fmt(g.e[i]);
        }
        for (Eigen::Index i = 0; i < d; ++i) {
            out.push_back('\t');
            out += detail::fmt(g.p[i]);
        }
        out.push_back('\n');
    }
    return out;
}

inline std::vector<GradientPair> parse_gradients_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("gradients file: empty");
    std::size_t cols = 0;
    for (char c : line)
        if (c == '\t') ++cols;
    if (cols == 0 || cols % 2 != 0)
        throw ConfigError("gradients file: bad header");
    const Eigen::Index d = static_cast<Eigen::Index>(cols / 2);
    std::vector<GradientPair> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        long step = 0;
        ls >> step;
        Vec ge(d), gp(d);
        for (Eigen::Index i = 0; i < d; ++i) ls >> ge[i];
        for (Eigen::Index i = 0; i < d; ++i) ls >> gp[i];
        if (!ls) throw ConfigError("gradients file: malformed row");
        out.emplace_back(ge, gp);
    }
    return out;
}

/// Output paths and run metadata persisted next to each trace.
struct RunManifest {
    RunConfig config;
    std::string hash;
    std::int64_t started_unix_ms = 0;
    std::int64_t finished_unix_ms = 0;
    std::string trace_path;
    std::string params_path;
    std::string gradients_path;  // empty when not instrumented
    std::string status = "ok";   // ok | failed
    std::string failure_message;
    long failure_step = -1;
    OracleCounts counts;
    double final_loss_e = 0.0;
    double final_loss_p = 0.0;
};

inline json manifest_to_json(const RunManifest& m) {
    json j;
    j["version"] = kConfigVersion;
    j["config"] = serialize_config(m.config);
    j["config_hash"] = m.hash;
    j["started_unix_ms"] = m.started_unix_ms;
    j["finished_unix_ms"] = m.finished_unix_ms;
    j["outputs"] = {{"trace", m.trace_path},
                    {"params", m.params_path},
                    {"gradients", m.gradients_path}};
    j["status"] = m.status;
    if (m.status != "ok") {
        j["failure"] = {{"message", m.failure_message}, {"step", m.failure_step}};
    }
    j["counts"] = {{"loss_e", m.counts.loss_e},
                   {"loss_p", m.counts.loss_p},
                   {"grad", m.counts.grad}};
    j["final_loss_e"] = m.final_loss_e;
    j["final_loss_p"] = m.final_loss_p;
    return j;
}

inline RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    m.config = parse_config(j.at("config"));
    m.hash = j.at("config_hash").get<std::string>();
    m.started_unix_ms = j.value("started_unix_ms", 0LL);
    m.finished_unix_ms = j.value("finished_unix_ms", 0LL);
    const json& out = j.at("outputs");
    m.trace_path = out.value("trace", "");
    m.params_path = out.value("params", "");
    m.gradients_path = out.value("gradients", "");
    m.status = j.value("status", "ok");
    if (j.contains("failure")) {
        m.failure_message = j.at("failure").value("message", "");
        m.failure_step = j.at("failure").value("step", -1L);
    }
    if (j.contains("counts")) {
        m.counts.loss_e = j.at("counts").value("loss_e", 0LL);
        m.counts.loss_p = j.at("counts").value("loss_p", 0LL);
        m.counts.grad = j.at("counts").value("grad", 0LL);
    }
    m.final_loss_e = j.value("final_loss_e", 0.0);
    m.final_loss_p = j.value("final_loss_p", 0.0);
    return m;
}

}  // namespace gradsurg::bench
