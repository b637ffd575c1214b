#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mtlgr/bench.hpp"
#include "mtlgr/error.hpp"

namespace mtlgr {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) { fail(Errc::config, what); }

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
            config_error(where + ": unknown key '" + it.key() + "'");
        }
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        config_error(where + "." + key + " has the wrong type");
    }
}

std::string support_name(SupportMode mode) {
    switch (mode) {
    case SupportMode::correlated: return "correlated";
    case SupportMode::shared: return "shared";
    case SupportMode::independent: return "independent";
    }
    return "correlated";
}

SupportMode parse_support(const std::string& tag) {
    if (tag == "correlated") return SupportMode::correlated;
    if (tag == "shared") return SupportMode::shared;
    if (tag == "independent") return SupportMode::independent;
    config_error("data.support must be correlated, shared or independent, got '" + tag + "'");
}

const char* criterion_name(TuningCriterion c) {
    return c == TuningCriterion::model_nmse ? "model-nmse" : "prediction-nmse";
}

const char* scope_name(TuningScope s) { return s == TuningScope::per_level ? "per-level" : "global"; }

const char* variant_name(ThresholdVariant v) { return v == ThresholdVariant::reflect ? "reflect" : "standard"; }

void parse_data(const json& data, const std::filesystem::path& base_dir, ExperimentConfig& cfg) {
    if (!data.is_object()) config_error("data must be an object");
    const auto source = get_or<std::string>(data, "source", "synthetic", "data");
    if (source == "synthetic") {
        reject_unknown(data, "data",
                       {"source", "features", "tasks", "rows_per_task", "sparsity", "noise_std", "support",
                        "shared_features", "base_missing", "test_rows"});
        SyntheticSource s;
        s.params.features = get_or(data, "features", s.params.features, "data");
        s.params.tasks = get_or(data, "tasks", s.params.tasks, "data");
        s.params.rows = get_or(data, "rows_per_task", s.params.rows, "data");
        s.params.sparsity = get_or(data, "sparsity", s.params.sparsity, "data");
        s.params.noise_std = get_or(data, "noise_std", s.params.noise_std, "data");
        s.params.support = parse_support(get_or<std::string>(data, "support", "correlated", "data"));
        s.params.shared_features = get_or(data, "shared_features", false, "data");
        s.base_missing = get_or(data, "base_missing", 0.0, "data");
        s.test_rows = get_or(data, "test_rows", s.params.rows, "data");
        if (s.params.features < 1 || s.params.tasks < 1 || s.params.rows < 1 || s.params.sparsity < 1 ||
            s.test_rows < 1) {
            config_error("data sizes must be positive");
        }
        if (s.params.sparsity > s.params.features) config_error("data.sparsity exceeds data.features");
        if (!(s.params.noise_std >= 0.0)) config_error("data.noise_std must be nonnegative");
        if (!(s.base_missing >= 0.0 && s.base_missing < 1.0)) config_error("data.base_missing must lie in [0, 1)");
        cfg.source = s;
    } else if (source == "csv") {
        reject_unknown(data, "data", {"source", "paths", "train_fraction", "normalize"});
        CsvSource c;
        const auto paths = get_or<std::vector<std::string>>(data, "paths", {}, "data");
        if (paths.empty()) config_error("data.paths must list at least one CSV file");
        for (const auto& p : paths) {
            std::filesystem::path path(p);
            c.paths.push_back(path.is_relative() && !base_dir.empty() ? base_dir / path : path);
        }
        c.train_fraction = get_or(data, "train_fraction", c.train_fraction, "data");
        c.normalize = get_or(data, "normalize", c.normalize, "data");
        if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) config_error("data.train_fraction must lie in (0, 1)");
        cfg.source = c;
    } else {
        config_error("data.source must be 'synthetic' or 'csv', got '" + source + "'");
    }
}

template <typename T>
std::vector<T> sorted_unique(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        config_error(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) config_error("config must be a JSON object");
    reject_unknown(doc, "config",
                   {"data", "graph", "methods", "missing_levels", "replications", "tuning", "grids", "estimator",
                    "completion", "solver", "seed", "output_dir", "threads"});

    ExperimentConfig cfg;
    if (doc.contains("data")) parse_data(doc.at("data"), base_dir, cfg);

    if (doc.contains("graph")) {
        const auto& g = doc.at("graph");
        if (g.is_string()) {
            if (g.get<std::string>() != "chain") config_error("graph must be \"chain\" or {\"edges\": [...]}");
        } else if (g.is_object()) {
            reject_unknown(g, "graph", {"edges"});
            cfg.graph.chain = false;
            try {
                for (const auto& e : g.at("edges")) {
                    if (!e.is_array() || e.size() != 2) config_error("graph.edges entries must be [i, k] pairs");
                    cfg.graph.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
                }
            } catch (const json::exception&) {
                config_error("graph.edges must be a list of integer pairs");
            }
        } else {
            config_error("graph must be \"chain\" or {\"edges\": [...]}");
        }
    }

    if (doc.contains("methods")) {
        cfg.methods.clear();
        for (const auto& tag : get_or<std::vector<std::string>>(doc, "methods", {}, "config")) {
            cfg.methods.push_back(parse_method(tag));
        }
        cfg.methods = sorted_unique(cfg.methods);
        if (cfg.methods.empty()) config_error("methods must be nonempty");
    }
    if (doc.contains("missing_levels")) {
        cfg.missing_levels = get_or<std::vector<double>>(doc, "missing_levels", {}, "config");
    }
    if (cfg.missing_levels.empty()) config_error("missing_levels must be nonempty");
    for (double level : cfg.missing_levels) {
        if (!(level >= 0.0 && level < 1.0)) config_error("missing levels must lie in [0, 1)");
    }
    cfg.replications = get_or(doc, "replications", cfg.replications, "config");
    if (cfg.replications < 1) config_error("replications must be >= 1");

    const bool csv = std::holds_alternative<CsvSource>(cfg.source);
    cfg.criterion = csv ? TuningCriterion::prediction_nmse : TuningCriterion::model_nmse;
    if (doc.contains("tuning")) {
        const auto& t = doc.at("tuning");
        reject_unknown(t, "tuning", {"replications", "criterion", "scope"});
        cfg.tuning_replications = get_or(t, "replications", cfg.tuning_replications, "tuning");
        const auto crit = get_or<std::string>(t, "criterion", criterion_name(cfg.criterion), "tuning");
        if (crit == "model-nmse") {
            cfg.criterion = TuningCriterion::model_nmse;
        } else if (crit == "prediction-nmse") {
            cfg.criterion = TuningCriterion::prediction_nmse;
        } else {
            config_error("tuning.criterion must be model-nmse or prediction-nmse");
        }
        const auto scope = get_or<std::string>(t, "scope", "per-level", "tuning");
        if (scope == "per-level") {
            cfg.scope = TuningScope::per_level;
        } else if (scope == "global") {
            cfg.scope = TuningScope::global;
        } else {
            config_error("tuning.scope must be per-level or global");
        }
    }
    if (cfg.tuning_replications < 1) config_error("tuning.replications must be >= 1");
    if (csv && cfg.criterion == TuningCriterion::model_nmse) {
        config_error("model-nmse tuning needs a known true model; use prediction-nmse with CSV data");
    }

    if (doc.contains("grids")) {
        const auto& g = doc.at("grids");
        reject_unknown(g, "grids", {"mu", "lambda", "delta", "rank"});
        cfg.grids.mu = get_or(g, "mu", cfg.grids.mu, "grids");
        cfg.grids.lambda = get_or(g, "lambda", cfg.grids.lambda, "grids");
        cfg.grids.delta = get_or(g, "delta", cfg.grids.delta, "grids");
        cfg.grids.rank = get_or(g, "rank", cfg.grids.rank, "grids");
    }
    cfg.grids.mu = sorted_unique(cfg.grids.mu);
    cfg.grids.lambda = sorted_unique(cfg.grids.lambda);
    cfg.grids.delta = sorted_unique(cfg.grids.delta);
    cfg.grids.rank = sorted_unique(cfg.grids.rank);
    if (cfg.grids.mu.empty() || cfg.grids.lambda.empty() || cfg.grids.delta.empty() || cfg.grids.rank.empty()) {
        config_error("every grid must be nonempty");
    }
    for (const auto* grid : {&cfg.grids.mu, &cfg.grids.lambda, &cfg.grids.delta}) {
        if (grid->front() < 0.0) config_error("grid values for mu, lambda and delta must be nonnegative");
    }
    if (cfg.grids.rank.front() < 1) config_error("grid ranks must be positive");

    if (doc.contains("estimator")) {
        const auto& e = doc.at("estimator");
        reject_unknown(e, "estimator", {"threshold_variant"});
        const auto v = get_or<std::string>(e, "threshold_variant", "reflect", "estimator");
        if (v == "reflect") {
            cfg.threshold_variant = ThresholdVariant::reflect;
        } else if (v == "standard") {
            cfg.threshold_variant = ThresholdVariant::standard;
        } else {
            config_error("estimator.threshold_variant must be reflect or standard");
        }
    }
    if (doc.contains("completion")) {
        const auto& c = doc.at("completion");
        reject_unknown(c, "completion", {"max_iters", "tol", "ridge"});
        cfg.completion.max_iters = get_or(c, "max_iters", cfg.completion.max_iters, "completion");
        cfg.completion.tol = get_or(c, "tol", cfg.completion.tol, "completion");
        cfg.completion.ridge = get_or(c, "ridge", cfg.completion.ridge, "completion");
    }
    if (cfg.completion.max_iters < 1 || !(cfg.completion.tol > 0.0) || !(cfg.completion.ridge >= 0.0)) {
        config_error("completion needs max_iters >= 1, tol > 0, ridge >= 0");
    }
    if (doc.contains("solver")) {
        const auto& s = doc.at("solver");
        reject_unknown(s, "solver", {"max_iters", "tol", "initial_step"});
        cfg.solver.max_iters = get_or(s, "max_iters", cfg.solver.max_iters, "solver");
        cfg.solver.tol = get_or(s, "tol", cfg.solver.tol, "solver");
        if (s.contains("initial_step") && !s.at("initial_step").is_null()) {
            cfg.solver.initial_step = get_or(s, "initial_step", 1.0, "solver");
        }
    }
    if (cfg.solver.max_iters < 1 || !(cfg.solver.tol > 0.0) ||
        (cfg.solver.initial_step && !(*cfg.solver.initial_step > 0.0))) {
        config_error("solver needs max_iters >= 1, tol > 0, initial_step > 0");
    }
    cfg.base_seed = get_or<std::uint64_t>(doc, "seed", 0, "config");
    cfg.output_dir = get_or<std::string>(doc, "output_dir", "results", "config");
    cfg.threads = get_or(doc, "threads", 1, "config");
    if (cfg.threads < 1) config_error("threads must be >= 1");

    resolve_graph(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

TaskGraph resolve_graph(const ExperimentConfig& config) {
    const int k = std::holds_alternative<SyntheticSource>(config.source)
                      ? std::get<SyntheticSource>(config.source).params.tasks
                      : static_cast<int>(std::get<CsvSource>(config.source).paths.size());
    if (config.graph.chain) return chain_graph(k);
    try {
        return TaskGraph::from_one_based(k, config.graph.edges);
    } catch (const Error& e) {
        config_error(std::string("graph: ") + e.what());
    }
}

std::string canonical_config(const ExperimentConfig& cfg) {
    json doc;
    if (const auto* s = std::get_if<SyntheticSource>(&cfg.source)) {
        doc["data"] = {{"source", "synthetic"},
                       {"features", s->params.features},
                       {"tasks", s->params.tasks},
                       {"rows_per_task", s->params.rows},
                       {"sparsity", s->params.sparsity},
                       {"noise_std", s->params.noise_std},
                       {"support", support_name(s->params.support)},
                       {"shared_features", s->params.shared_features},
                       {"base_missing", s->base_missing},
                       {"test_rows", s->test_rows == 0 ? s->params.rows : s->test_rows}};
    } else {
        const auto& c = std::get<CsvSource>(cfg.source);
        std::vector<std::string> paths;
        for (const auto& p : c.paths) paths.push_back(p.lexically_normal().generic_string());
        doc["data"] = {{"source", "csv"}, {"paths", paths}, {"train_fraction", c.train_fraction},
                       {"normalize", c.normalize}};
    }
    if (cfg.graph.chain) {
        doc["graph"] = "chain";
    } else {
        json edges = json::array();
        for (auto [a, b] : cfg.graph.edges) edges.push_back({a, b});
        doc["graph"] = {{"edges", edges}};
    }
    std::vector<std::string> methods;
    for (auto m : cfg.methods) methods.emplace_back(method_name(m));
    doc["methods"] = methods;
    doc["missing_levels"] = cfg.missing_levels;
    doc["replications"] = cfg.replications;
    doc["tuning"] = {{"replications", cfg.tuning_replications},
                     {"criterion", criterion_name(cfg.criterion)},
                     {"scope", scope_name(cfg.scope)}};
    doc["grids"] = {{"mu", cfg.grids.mu}, {"lambda", cfg.grids.lambda}, {"delta", cfg.grids.delta},
                    {"rank", cfg.grids.rank}};
    doc["estimator"] = {{"threshold_variant", variant_name(cfg.threshold_variant)}};
    doc["completion"] = {{"max_iters", cfg.completion.max_iters}, {"tol", cfg.completion.tol},
                         {"ridge", cfg.completion.ridge}};
    doc["solver"] = {{"max_iters", cfg.solver.max_iters},
                     {"tol", cfg.solver.tol},
                     {"initial_step", cfg.solver.initial_step ? json(*cfg.solver.initial_step) : json(nullptr)}};
    doc["seed"] = cfg.base_seed;
    return doc.dump();
}

std::string config_hash(const ExperimentConfig& config) {
    // FNV-1a, 64 bit.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_config(config)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace mtlgr
