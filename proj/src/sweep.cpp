#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "mtlgr/bench.hpp"
#include "mtlgr/error.hpp"
#include "mtlgr/random.hpp"

namespace mtlgr {

const char* method_name(Method method) noexcept {
    switch (method) {
    case Method::mean_impute: return "mean-impute";
    case Method::mf_lgr: return "mf-lgr";
    case Method::rlgr: return "rlgr";
    case Method::rlgr1: return "rlgr1";
    }
    return "unknown";
}

Method parse_method(const std::string& tag) {
    for (auto m : {Method::mean_impute, Method::mf_lgr, Method::rlgr, Method::rlgr1}) {
        if (tag == method_name(m)) return m;
    }
    fail(Errc::config, "unknown method '" + tag + "' (expected mean-impute, mf-lgr, rlgr or rlgr1)");
}

namespace {

constexpr std::uint64_t kEvalStream = 1;
constexpr std::uint64_t kTuneStream = 2;

template <typename Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// One replication's worth of training data plus whatever is needed to score
// a fitted model on it.
struct Prepared {
    DatasetBundle train;
    std::vector<Eigen::MatrixXd> test_x;
    std::vector<Eigen::VectorXd> test_y;
    std::optional<ModelMatrix> truth;
    std::vector<Eigen::MatrixXd> true_gamma;
};

class SweepContext {
public:
    explicit SweepContext(const ExperimentConfig& config)
        : config_(config), graph_(resolve_graph(config)), incidence_(build_incidence(graph_)) {
        if (const auto* csv = std::get_if<CsvSource>(&config.source)) {
            csv_.emplace(load_task_csv(csv->paths));
            csv_->graph = graph_;
        }
    }

    const Eigen::MatrixXi& incidence() const { return incidence_; }

    Prepared prepare(double level, std::uint64_t seed) const {
        if (const auto* synth = std::get_if<SyntheticSource>(&config_.source)) return prepare_synthetic(*synth, level, seed);
        return prepare_csv(std::get<CsvSource>(config_.source), level, seed);
    }

private:
    Prepared prepare_synthetic(const SyntheticSource& source, double level, std::uint64_t seed) const {
        auto [bundle, truth] = synth_generate(source.params, graph_, derive_seed(seed, {0}));
        if (source.base_missing > 0.0) bundle = inject_mcar(bundle, source.base_missing, derive_seed(seed, {1}));
        bundle = inject_mcar(bundle, level, derive_seed(seed, {2}));
        const int test_rows = source.test_rows > 0 ? source.test_rows : source.params.rows;
        const DatasetBundle test = synth_sample(truth.true_model, graph_, test_rows, source.params.noise_std,
                                                source.params.shared_features, derive_seed(seed, {3}));
        Prepared out{std::move(bundle), {}, {}, truth.true_model, {}};
        for (const auto& task : test.tasks) {
            out.test_x.push_back(task.values);
            out.test_y.push_back(task.response);
        }
        for (const auto& m : truth.true_moments) out.true_gamma.push_back(m.gamma_mat);
        return out;
    }

    Prepared prepare_csv(const CsvSource& source, double level, std::uint64_t seed) const {
        auto [train, test] = train_test_split(*csv_, source.train_fraction, derive_seed(seed, {0}));
        train = inject_mcar(train, level, derive_seed(seed, {1}));
        test = inject_mcar(test, level, derive_seed(seed, {2}));
        if (source.normalize) {
            const auto norms = column_norms(train);
            train = scale_columns(train, norms);
            test = scale_columns(test, norms);
        }
        Prepared out{std::move(train), {}, {}, std::nullopt, {}};
        for (std::size_t t = 0; t < test.tasks.size(); ++t) {
            const auto& task = test.tasks[t];
            out.test_x.push_back(fill_missing(task, observed_column_means(out.train.tasks[t])));
            out.test_y.push_back(task.response);
        }
        return out;
    }

    const ExperimentConfig& config_;
    TaskGraph graph_;
    Eigen::MatrixXi incidence_;
    std::optional<DatasetBundle> csv_;
};

struct MethodMoments {
    std::vector<MomentPair> moments;
    std::vector<std::string> warnings;
};

// Moments for the methods whose estimate does not depend on delta; rlgr1
// thresholds the rlgr pair afterwards.
MethodMoments base_moments(Method method, const DatasetBundle& train, int rank, const CompletionConfig& completion) {
    MethodMoments out;
    for (std::size_t t = 0; t < train.tasks.size(); ++t) {
        const auto& task = train.tasks[t];
        switch (method) {
        case Method::mean_impute: {
            auto imputed = mean_impute(task);
            for (auto& w : imputed.warnings) out.warnings.push_back("task " + std::to_string(t + 1) + " " + w);
            out.moments.push_back(empirical_moments(imputed.values, task.response));
            break;
        }
        case Method::mf_lgr: {
            CompletionConfig c = completion;
            c.rank = rank;
            out.moments.push_back(empirical_moments(mf_complete(task, c), task.response));
            break;
        }
        case Method::rlgr:
        case Method::rlgr1: out.moments.push_back(plugin_moments_rlgr(task)); break;
        }
    }
    return out;
}

std::vector<MomentPair> thresholded(const std::vector<MomentPair>& base, double delta, ThresholdVariant variant) {
    std::vector<MomentPair> out;
    out.reserve(base.size());
    for (const auto& m : base) out.push_back(threshold_spectrum(m, delta, variant));
    return out;
}

struct Evaluation {
    std::optional<double> nmse_w;
    std::optional<double> nmse_gamma;
    std::optional<double> prediction_nmse;
    std::optional<double> rmse;
    bool converged = false;
    int iterations = 0;
};

Evaluation evaluate(const Prepared& data, const std::vector<MomentPair>& moments, const Hyperparams& hyper,
                    const Eigen::MatrixXi& incidence, const SolverSettings& solver) {
    const SolverReport report = fit(moments, hyper, incidence, solver);
    Evaluation ev;
    ev.converged = report.converged;
    ev.iterations = report.iterations;
    if (data.truth) {
        ev.nmse_w = nmse_model(report.model, *data.truth);
        std::vector<Eigen::MatrixXd> estimates;
        for (const auto& m : moments) estimates.push_back(m.gamma_mat);
        ev.nmse_gamma = nmse_cov(estimates, data.true_gamma);
    }
    std::vector<Eigen::VectorXd> predictions;
    for (std::size_t t = 0; t < data.test_x.size(); ++t) {
        predictions.push_back(predict(data.test_x[t], report.model.coefficients.col(static_cast<Eigen::Index>(t))));
    }
    ev.prediction_nmse = prediction_nmse(predictions, data.test_y);
    ev.rmse = prediction_rmse(predictions, data.test_y);
    return ev;
}

std::optional<double> criterion_of(const Evaluation& ev, TuningCriterion criterion) {
    return criterion == TuningCriterion::model_nmse ? ev.nmse_w : ev.prediction_nmse;
}

std::vector<GridPoint> enumerate_grid(const Grids& grids, Method method) {
    std::vector<GridPoint> points;
    const std::vector<double> no_delta{0.0};
    const std::vector<int> no_rank{0};
    const auto& deltas = method == Method::rlgr1 ? grids.delta : no_delta;
    const auto& ranks = method == Method::mf_lgr ? grids.rank : no_rank;
    for (double mu : grids.mu) {
        for (double lambda : grids.lambda) {
            for (double delta : deltas) {
                for (int rank : ranks) points.push_back({mu, lambda, delta, rank});
            }
        }
    }
    std::sort(points.begin(), points.end());
    return points;
}

// Scores every grid point on one prepared replication. Fit failures leave
// the point's entry empty with a message.
struct JobScores {
    std::vector<std::optional<double>> values;
    std::vector<std::string> failures;
    std::string data_failure;
};

JobScores score_grid(const ExperimentConfig& config, const SweepContext& ctx, Method method,
                     const std::vector<GridPoint>& points, double level, std::uint64_t seed) {
    JobScores out;
    out.values.resize(points.size());
    out.failures.resize(points.size());
    std::optional<Prepared> prepared;
    try {
        prepared.emplace(ctx.prepare(level, seed));
    } catch (const Error& e) {
        out.data_failure = e.what();
        return out;
    }
    const Prepared& data = *prepared;
    // Points are sorted by (mu, lambda, delta, rank); group them by the part
    // that determines the moments (delta, rank) so each estimate is built once.
    std::map<std::pair<double, int>, std::vector<std::size_t>> by_variant;
    for (std::size_t i = 0; i < points.size(); ++i) by_variant[{points[i].delta, points[i].rank}].push_back(i);

    std::optional<MethodMoments> rlgr_base;
    for (const auto& [variant, indices] : by_variant) {
        std::vector<MomentPair> moments;
        try {
            if (method == Method::rlgr1) {
                if (!rlgr_base) rlgr_base = base_moments(Method::rlgr, data.train, 0, config.completion);
                moments = thresholded(rlgr_base->moments, variant.first, config.threshold_variant);
            } else {
                moments = base_moments(method, data.train, variant.second, config.completion).moments;
            }
        } catch (const Error& e) {
            for (auto i : indices) out.failures[i] = e.what();
            continue;
        }
        for (auto i : indices) {
            try {
                const auto ev = evaluate(data, moments, points[i].hyper(), ctx.incidence(), config.solver);
                out.values[i] = criterion_of(ev, config.criterion);
                if (!out.values[i]) out.failures[i] = "criterion unavailable for this data source";
            } catch (const Error& e) {
                out.failures[i] = e.what();
            }
        }
    }
    return out;
}

std::string sanitize(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io, "cannot write " + path.string());
    return out;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        fail(Errc::io, "cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
    }
}

}  // namespace

TuningOutcome tune_grid(const ExperimentConfig& config, Method method, std::optional<std::size_t> level_index) {
    if (level_index && *level_index >= config.missing_levels.size()) {
        fail(Errc::invalid_argument, "level index out of range");
    }
    const SweepContext ctx(config);
    const auto points = enumerate_grid(config.grids, method);

    std::vector<std::size_t> levels;
    if (level_index) {
        levels.push_back(*level_index);
    } else {
        for (std::size_t l = 0; l < config.missing_levels.size(); ++l) levels.push_back(l);
    }
    const auto reps = static_cast<std::size_t>(config.tuning_replications);
    std::vector<JobScores> jobs(levels.size() * reps);
    parallel_for(jobs.size(), config.threads, [&](std::size_t j) {
        const auto level = levels[j / reps];
        const auto rep = j % reps;
        jobs[j] = score_grid(config, ctx, method, points, config.missing_levels[level],
                             derive_seed(config.base_seed, {kTuneStream, level, rep}));
    });

    TuningOutcome outcome;
    outcome.method = method;
    outcome.level_index = level_index;
    std::size_t usable = 0;
    std::string data_failure;
    for (const auto& job : jobs) {
        if (job.data_failure.empty()) {
            ++usable;
        } else if (data_failure.empty()) {
            data_failure = job.data_failure;
        }
    }
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < points.size(); ++i) {
        GridScore score{points[i], std::nullopt, {}};
        double sum = 0.0;
        bool ok = usable > 0;
        for (const auto& job : jobs) {
            if (!job.data_failure.empty()) continue;
            if (!job.values[i]) {
                ok = false;
                score.failure = job.failures[i];
                break;
            }
            sum += *job.values[i];
        }
        if (usable == 0) score.failure = data_failure;
        if (ok) {
            score.criterion = sum / static_cast<double>(usable);
            if (!best || *score.criterion < *outcome.scores[*best].criterion) best = i;
        }
        outcome.scores.push_back(std::move(score));
    }
    if (!best) {
        fail(Errc::tuning_failure, std::string("every grid point failed for ") + method_name(method) +
                                       (data_failure.empty() ? "" : " (" + data_failure + ")"));
    }
    outcome.chosen = points[*best];
    return outcome;
}

SweepResult run_sweep(const ExperimentConfig& config) {
    const SweepContext ctx(config);
    const std::size_t level_count = config.missing_levels.size();

    SweepResult result;
    // chosen[method][level]; empty optional records a tuning failure.
    std::map<Method, std::vector<std::optional<GridPoint>>> chosen;
    std::map<Method, std::string> tuning_errors;
    for (auto method : config.methods) {
        auto& slots = chosen[method];
        slots.assign(level_count, std::nullopt);
        try {
            if (config.scope == TuningScope::global) {
                auto outcome = tune_grid(config, method, std::nullopt);
                for (auto& s : slots) s = outcome.chosen;
                result.tuning.push_back(std::move(outcome));
            } else {
                for (std::size_t l = 0; l < level_count; ++l) {
                    auto outcome = tune_grid(config, method, l);
                    slots[l] = outcome.chosen;
                    result.tuning.push_back(std::move(outcome));
                }
            }
        } catch (const Error& e) {
            if (e.code() != Errc::tuning_failure) throw;
            tuning_errors[method] = e.what();
        }
    }

    const auto reps = static_cast<std::size_t>(config.replications);
    const auto method_count = config.methods.size();
    std::vector<ResultRow> rows(level_count * reps * method_count);
    parallel_for(level_count * reps, config.threads, [&](std::size_t job) {
        const auto level = job / reps;
        const auto rep = job % reps;
        const double fraction = config.missing_levels[level];
        std::optional<Prepared> data;
        std::string data_failure;
        try {
            data = ctx.prepare(fraction, derive_seed(config.base_seed, {kEvalStream, level, rep}));
        } catch (const Error& e) {
            data_failure = e.what();
        }
        for (std::size_t m = 0; m < method_count; ++m) {
            const Method method = config.methods[m];
            ResultRow& row = rows[(m * level_count + level) * reps + rep];
            row.method = method;
            row.missing_fraction = fraction;
            row.replication = static_cast<int>(rep);
            const auto& point = chosen[method][level];
            if (!point) {
                row.note = "tuning failed: " + tuning_errors[method];
                continue;
            }
            row.hyper = *point;
            if (!data) {
                row.note = data_failure;
                continue;
            }
            const auto start = std::chrono::steady_clock::now();
            try {
                MethodMoments mm = base_moments(method == Method::rlgr1 ? Method::rlgr : method, data->train,
                                                point->rank, config.completion);
                if (method == Method::rlgr1) mm.moments = thresholded(mm.moments, point->delta, config.threshold_variant);
                const auto ev = evaluate(*data, mm.moments, point->hyper(), ctx.incidence(), config.solver);
                row.nmse_w = ev.nmse_w;
                row.nmse_gamma = ev.nmse_gamma;
                row.prediction_nmse = ev.prediction_nmse;
                row.rmse = ev.rmse;
                row.converged = ev.converged;
                row.iterations = ev.iterations;
                for (const auto& w : mm.warnings) row.note += (row.note.empty() ? "" : "; ") + w;
            } catch (const Error& e) {
                row.note = e.what();
            }
            row.runtime_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        }
    });
    result.rows = std::move(rows);
    return result;
}

EmittedFiles emit_results(const SweepResult& result, const ExperimentConfig& config) {
    if (result.rows.empty()) fail(Errc::invalid_argument, "no result rows to write");
    ensure_dir(config.output_dir);
    const std::string hash = config_hash(config);
    EmittedFiles files{config.output_dir / ("results_" + hash + ".csv"),
                       config.output_dir / ("aggregate_" + hash + ".csv"),
                       config.output_dir / ("timings_" + hash + ".csv"),
                       config.output_dir / ("metadata_" + hash + ".json")};

    {
        auto out = open_output(files.raw);
        out << "method,missing_fraction,replication,nmse_w,nmse_gamma,prediction_nmse,rmse,mu,lambda,delta,rank,"
               "iterations,converged,note\n";
        for (const auto& r : result.rows) {
            out << method_name(r.method) << ',' << format_double(r.missing_fraction) << ',' << r.replication << ','
                << opt(r.nmse_w) << ',' << opt(r.nmse_gamma) << ',' << opt(r.prediction_nmse) << ',' << opt(r.rmse)
                << ',' << format_double(r.hyper.mu) << ',' << format_double(r.hyper.lambda) << ','
                << (r.method == Method::rlgr1 ? format_double(r.hyper.delta) : "") << ','
                << (r.method == Method::mf_lgr ? std::to_string(r.hyper.rank) : "") << ',' << r.iterations << ','
                << (r.converged ? 1 : 0) << ',' << sanitize(r.note) << '\n';
        }
        if (!out) fail(Errc::io, "write failed for " + files.raw.string());
    }
    {
        auto out = open_output(files.timings);
        out << "method,missing_fraction,replication,runtime_ms\n";
        for (const auto& r : result.rows) {
            out << method_name(r.method) << ',' << format_double(r.missing_fraction) << ',' << r.replication << ','
                << format_double(r.runtime_ms) << '\n';
        }
    }
    {
        auto out = open_output(files.aggregate);
        const std::vector<std::pair<const char*, std::optional<double> ResultRow::*>> metrics{
            {"nmse_w", &ResultRow::nmse_w},
            {"nmse_gamma", &ResultRow::nmse_gamma},
            {"prediction_nmse", &ResultRow::prediction_nmse},
            {"rmse", &ResultRow::rmse}};
        out << "method,missing_fraction,rows";
        for (const auto& [name, member] : metrics) out << ',' << name << "_count," << name << "_mean," << name << "_stderr";
        out << '\n';
        // Rows are grouped by (method, level) in the order they were produced.
        std::size_t begin = 0;
        while (begin < result.rows.size()) {
            std::size_t end = begin;
            while (end < result.rows.size() && result.rows[end].method == result.rows[begin].method &&
                   result.rows[end].missing_fraction == result.rows[begin].missing_fraction) {
                ++end;
            }
            out << method_name(result.rows[begin].method) << ',' << format_double(result.rows[begin].missing_fraction)
                << ',' << (end - begin);
            for (const auto& [name, member] : metrics) {
                std::vector<double> values;
                for (std::size_t i = begin; i < end; ++i) {
                    if (const auto& v = result.rows[i].*member) values.push_back(*v);
                }
                if (values.empty()) {
                    out << ",0,,";
                    continue;
                }
                double mean = 0.0;
                for (double v : values) mean += v;
                mean /= static_cast<double>(values.size());
                double se = 0.0;
                if (values.size() > 1) {
                    double ss = 0.0;
                    for (double v : values) ss += (v - mean) * (v - mean);
                    se = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
                }
                out << ',' << values.size() << ',' << format_double(mean) << ',' << format_double(se);
            }
            out << '\n';
            begin = end;
        }
    }
    {
        nlohmann::json meta;
        meta["config_hash"] = hash;
        meta["config"] = nlohmann::json::parse(canonical_config(config));
        meta["tuning_scope"] = config.scope == TuningScope::per_level ? "per-level" : "global";
        nlohmann::json tuned = nlohmann::json::array();
        for (const auto& t : result.tuning) {
            nlohmann::json entry{{"method", method_name(t.method)},
                                 {"mu", t.chosen.mu},
                                 {"lambda", t.chosen.lambda}};
            entry["missing_fraction"] =
                t.level_index ? nlohmann::json(config.missing_levels[*t.level_index]) : nlohmann::json("all");
            if (t.method == Method::rlgr1) entry["delta"] = t.chosen.delta;
            if (t.method == Method::mf_lgr) entry["rank"] = t.chosen.rank;
            tuned.push_back(entry);
        }
        meta["tuned"] = tuned;
        auto out = open_output(files.metadata);
        out << meta.dump(2) << '\n';
    }
    return files;
}

std::filesystem::path emit_tuning(const std::vector<TuningOutcome>& outcomes, const ExperimentConfig& config) {
    ensure_dir(config.output_dir);
    const auto path = config.output_dir / ("tuning_" + config_hash(config) + ".csv");
    auto out = open_output(path);
    out << "method,missing_fraction,mu,lambda,delta,rank,criterion,chosen,failure\n";
    for (const auto& t : outcomes) {
        const std::string level = t.level_index ? format_double(config.missing_levels[*t.level_index]) : "all";
        for (const auto& s : t.scores) {
            out << method_name(t.method) << ',' << level << ',' << format_double(s.point.mu) << ','
                << format_double(s.point.lambda) << ','
                << (t.method == Method::rlgr1 ? format_double(s.point.delta) : "") << ','
                << (t.method == Method::mf_lgr ? std::to_string(s.point.rank) : "") << ',' << opt(s.criterion) << ','
                << (s.point == t.chosen ? 1 : 0) << ',' << sanitize(s.failure) << '\n';
        }
    }
    if (!out) fail(Errc::io, "write failed for " + path.string());
    return path;
}

}  // namespace mtlgr
