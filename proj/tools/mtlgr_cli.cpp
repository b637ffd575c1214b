#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mtlgr/mtlgr.h"

namespace {

enum ExitCode { exit_ok = 0, exit_config = 1, exit_data = 2, exit_numerical = 3 };

int exit_code(mtlgr_status s) {
    switch (s) {
    case MTLGR_OK: return exit_ok;
    case MTLGR_DEGENERATE_COLUMN:
    case MTLGR_SCHEMA_ERROR:
    case MTLGR_INVALID_DATA:
    case MTLGR_IO_ERROR: return exit_data;
    case MTLGR_NUMERICAL_FAILURE:
    case MTLGR_INTERNAL_ERROR: return exit_numerical;
    default: return exit_config;
    }
}

struct Failure {
    int code;
};

void check(mtlgr_status s, const std::string& context) {
    if (s == MTLGR_OK) return;
    std::cerr << "mtlgr: " << context << ": " << mtlgr_status_string(s) << ": " << mtlgr_last_error() << '\n';
    throw Failure{exit_code(s)};
}

[[noreturn]] void usage_error(const std::string& message) {
    std::cerr << "mtlgr: " << message << '\n';
    throw Failure{exit_config};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};

using Config = std::unique_ptr<mtlgr_config, Deleter<mtlgr_config, mtlgr_config_free>>;
using Dataset = std::unique_ptr<mtlgr_dataset, Deleter<mtlgr_dataset, mtlgr_dataset_free>>;
using Model = std::unique_ptr<mtlgr_model, Deleter<mtlgr_model, mtlgr_model_free>>;
using Sweep = std::unique_ptr<mtlgr_sweep, Deleter<mtlgr_sweep, mtlgr_sweep_free>>;

struct CommonFlags {
    std::string config;
    std::optional<uint64_t> seed;
    std::string out;
    std::optional<int> threads;
    std::vector<std::string> methods;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool need_config) {
    auto* c = cmd->add_option("--config", f.config, "experiment config (JSON)");
    if (need_config) c->required();
    cmd->add_option("--seed", f.seed, "base seed (overrides config)");
    cmd->add_option("--out", f.out, "output directory (overrides config)");
    cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--method", f.methods, "method tag: mean-impute, mf-lgr, rlgr, rlgr1");
}

mtlgr_method parse_method(const std::string& tag) {
    mtlgr_method m{};
    check(mtlgr_method_parse(tag.c_str(), &m), "--method");
    return m;
}

Config open_config(const CommonFlags& f) {
    mtlgr_config* raw = nullptr;
    check(mtlgr_config_load(f.config.c_str(), &raw), f.config);
    Config cfg(raw);
    if (f.seed) check(mtlgr_config_set_seed(cfg.get(), *f.seed), "--seed");
    if (!f.out.empty()) check(mtlgr_config_set_output_dir(cfg.get(), f.out.c_str()), "--out");
    if (f.threads) check(mtlgr_config_set_threads(cfg.get(), *f.threads), "--threads");
    if (!f.methods.empty()) {
        std::vector<mtlgr_method> list;
        for (const auto& tag : f.methods) list.push_back(parse_method(tag));
        check(mtlgr_config_set_methods(cfg.get(), list.data(), static_cast<int32_t>(list.size())), "--method");
    }
    return cfg;
}

Dataset load_csv(const std::vector<std::string>& files) {
    std::vector<const char*> paths;
    for (const auto& f : files) paths.push_back(f.c_str());
    mtlgr_dataset* raw = nullptr;
    check(mtlgr_dataset_load_csv(paths.data(), static_cast<int32_t>(paths.size()), &raw), "loading CSV");
    return Dataset(raw);
}

std::string fmt(double v) {
    if (std::isnan(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// generate ------------------------------------------------------------------

int run_generate(const CommonFlags& f, const std::string& stem) {
    Config cfg = open_config(f);
    const uint64_t seed = mtlgr_config_seed(cfg.get());
    mtlgr_dataset* raw = nullptr;
    mtlgr_model* truth_raw = nullptr;
    check(mtlgr_config_generate(cfg.get(), seed, &raw, &truth_raw), "generate");
    Dataset data(raw);
    Model truth(truth_raw);
    const std::string dir = f.out.empty() ? "." : f.out;
    std::filesystem::create_directories(dir);
    check(mtlgr_dataset_write_csv(data.get(), dir.c_str(), stem.c_str()), "writing tasks");
    const std::string truth_path = (std::filesystem::path(dir) / (stem + "_true_model.csv")).string();
    check(mtlgr_model_write_csv(truth.get(), truth_path.c_str()), "writing true model");
    const int tasks = mtlgr_dataset_task_count(data.get());
    for (int t = 0; t < tasks; ++t) {
        std::cout << "task " << (t + 1) << ": rows=" << mtlgr_dataset_rows(data.get(), t)
                  << " missing=" << fmt(mtlgr_dataset_missing_rate(data.get(), t)) << '\n';
    }
    std::cout << "wrote " << tasks << " task files and " << truth_path << '\n';
    return exit_ok;
}

// fit -----------------------------------------------------------------------

struct FitFlags {
    std::vector<std::string> files;
    mtlgr_hyper hyper{1e-2, 1e-2, 0.0, 5};
    double train_fraction = 0.6;
    bool raw_scale = false;
    int max_iters = 5000;
    double tol = 1e-6;
};

int run_fit(const CommonFlags& f, const FitFlags& ff) {
    if (f.methods.size() > 1) usage_error("fit takes a single --method");
    const mtlgr_method method = f.methods.empty() ? MTLGR_RLGR1 : parse_method(f.methods.front());
    Dataset all = load_csv(ff.files);

    mtlgr_dataset* a = nullptr;
    mtlgr_dataset* b = nullptr;
    check(mtlgr_dataset_split(all.get(), ff.train_fraction, f.seed.value_or(0), &a, &b), "split");
    Dataset train(a);
    Dataset test(b);
    if (!ff.raw_scale) {
        mtlgr_dataset* ta = nullptr;
        mtlgr_dataset* tb = nullptr;
        check(mtlgr_dataset_scale_like(test.get(), train.get(), &tb), "normalizing test set");
        Dataset scaled_test(tb);
        check(mtlgr_dataset_l2_normalize(train.get(), &ta), "normalizing training set");
        train.reset(ta);
        test = std::move(scaled_test);
    }

    mtlgr_solver_settings settings;
    mtlgr_solver_settings_default(&settings);
    settings.max_iters = ff.max_iters;
    settings.tol = ff.tol;
    mtlgr_model* m = nullptr;
    check(mtlgr_fit(train.get(), method, &ff.hyper, &settings, &m), "fit");
    Model model(m);

    double nmse = 0.0;
    double rmse = 0.0;
    check(mtlgr_evaluate(model.get(), test.get(), train.get(), &nmse, &rmse), "evaluate");
    std::cout << "method " << mtlgr_method_name(method) << '\n'
              << "iterations " << mtlgr_model_iterations(model.get()) << '\n'
              << "converged " << (mtlgr_model_converged(model.get()) ? "yes" : "no") << '\n'
              << "objective " << fmt(mtlgr_model_final_objective(model.get())) << '\n'
              << "prediction_nmse " << fmt(nmse) << '\n'
              << "rmse " << fmt(rmse) << '\n';
    if (!f.out.empty()) {
        std::filesystem::create_directories(f.out);
        const std::string path = (std::filesystem::path(f.out) / "coefficients.csv").string();
        check(mtlgr_model_write_csv(model.get(), path.c_str()), "writing coefficients");
        std::cout << "wrote " << path << '\n';
    }
    return exit_ok;
}

// sweep ---------------------------------------------------------------------

int run_sweep(const CommonFlags& f) {
    Config cfg = open_config(f);
    mtlgr_sweep* raw = nullptr;
    check(mtlgr_sweep_run(cfg.get(), &raw), "sweep");
    Sweep sweep(raw);
    char path[4096];
    check(mtlgr_sweep_write(sweep.get(), cfg.get(), path, sizeof path), "writing results");

    struct Acc {
        double sum = 0.0;
        int count = 0;
    };
    std::map<std::pair<int, double>, std::pair<Acc, Acc>> summary;
    const int64_t rows = mtlgr_sweep_row_count(sweep.get());
    int failed = 0;
    for (int64_t i = 0; i < rows; ++i) {
        mtlgr_result_row r;
        check(mtlgr_sweep_row(sweep.get(), i, &r), "reading rows");
        auto& [w, p] = summary[{static_cast<int>(r.method), r.missing_fraction}];
        if (!std::isnan(r.nmse_w)) w.sum += r.nmse_w, ++w.count;
        if (!std::isnan(r.prediction_nmse)) p.sum += r.prediction_nmse, ++p.count;
        if (std::isnan(r.prediction_nmse)) ++failed;
    }
    std::cout << "method,missing_fraction,mean_nmse_w,mean_prediction_nmse\n";
    for (const auto& [key, acc] : summary) {
        const auto& [w, p] = acc;
        std::cout << mtlgr_method_name(static_cast<mtlgr_method>(key.first)) << ',' << fmt(key.second) << ','
                  << (w.count ? fmt(w.sum / w.count) : "NA") << ',' << (p.count ? fmt(p.sum / p.count) : "NA")
                  << '\n';
    }
    if (failed > 0) std::cerr << "mtlgr: " << failed << " rows carry no metrics; see the note column\n";
    std::cout << "wrote " << path << '\n';
    return exit_ok;
}

// tune ----------------------------------------------------------------------

int run_tune(const CommonFlags& f, std::optional<int> level) {
    Config cfg = open_config(f);
    if (!level) {
        char path[4096];
        check(mtlgr_tune_write(cfg.get(), path, sizeof path), "tune");
        std::cout << "wrote " << path << '\n';
        return exit_ok;
    }
    if (*level < 0 || *level >= mtlgr_config_level_count(cfg.get())) usage_error("--level out of range");
    if (f.methods.empty()) usage_error("--level requires --method");
    for (const auto& tag : f.methods) {
        const mtlgr_method m = parse_method(tag);
        mtlgr_hyper h;
        double score = 0.0;
        check(mtlgr_tune(cfg.get(), m, *level, &h, &score), "tune");
        std::cout << mtlgr_method_name(m) << " mu=" << fmt(h.mu) << " lambda=" << fmt(h.lambda)
                  << " delta=" << fmt(h.delta) << " rank=" << h.rank << " criterion=" << fmt(score) << '\n';
    }
    return exit_ok;
}

// weibull -------------------------------------------------------------------

int run_weibull(const CommonFlags& f, const std::vector<std::string>& files, int points) {
    Dataset data = load_csv(files);
    const std::filesystem::path dir = f.out.empty() ? "." : f.out;
    std::filesystem::create_directories(dir);
    std::ofstream params(dir / "weibull_params.csv");
    std::ofstream curves(dir / "weibull_curves.csv");
    if (!params || !curves) {
        std::cerr << "mtlgr: cannot write to " << dir << '\n';
        throw Failure{exit_data};
    }
    params << "task,shape,scale\n";
    curves << "task,x,pdf\n";
    const int tasks = mtlgr_dataset_task_count(data.get());
    for (int t = 0; t < tasks; ++t) {
        std::vector<double> y(static_cast<size_t>(mtlgr_dataset_rows(data.get(), t)));
        check(mtlgr_dataset_response(data.get(), t, y.data()), "reading scores");
        if (std::any_of(y.begin(), y.end(), [](double v) { return !(v > 0.0); })) {
            std::cerr << "mtlgr: task " << (t + 1) << " has non-positive scores\n";
            throw Failure{exit_data};
        }
        double shape = 0.0;
        double scale = 0.0;
        check(mtlgr_weibull_fit(y.data(), static_cast<int64_t>(y.size()), &shape, &scale), "weibull fit");
        params << (t + 1) << ',' << fmt(shape) << ',' << fmt(scale) << '\n';
        const double top = *std::max_element(y.begin(), y.end()) * 1.2;
        for (int i = 1; i <= points; ++i) {
            const double x = top * i / points;
            curves << (t + 1) << ',' << fmt(x) << ',' << fmt(mtlgr_weibull_pdf(x, shape, scale)) << '\n';
        }
        std::cout << "task " << (t + 1) << ": shape=" << fmt(shape) << " scale=" << fmt(scale) << '\n';
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-regularized multi-task LASSO with missing features"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mtlgr_version()));

    CommonFlags gen_flags;
    std::string stem = "task";
    auto* gen = app.add_subcommand("generate", "write synthetic task CSVs from a config");
    add_common(gen, gen_flags, true);
    gen->add_option("--stem", stem, "file name stem");

    CommonFlags fit_flags;
    FitFlags ff;
    auto* fit = app.add_subcommand("fit", "fit one model on task CSVs and print test metrics");
    add_common(fit, fit_flags, false);
    fit->add_option("files", ff.files, "task CSV files, one per task")->required()->check(CLI::ExistingFile);
    fit->add_option("--mu", ff.hyper.mu, "l1 weight")->check(CLI::NonNegativeNumber);
    fit->add_option("--lambda", ff.hyper.lambda, "graph weight")->check(CLI::NonNegativeNumber);
    fit->add_option("--delta", ff.hyper.delta, "eigenvalue threshold")->check(CLI::NonNegativeNumber);
    fit->add_option("--rank", ff.hyper.rank, "completion rank")->check(CLI::PositiveNumber);
    fit->add_option("--train-fraction", ff.train_fraction, "fraction of rows used for training")
        ->check(CLI::Range(0.0, 1.0));
    fit->add_flag("--raw", ff.raw_scale, "skip column normalization");
    fit->add_option("--max-iters", ff.max_iters)->check(CLI::PositiveNumber);
    fit->add_option("--tol", ff.tol)->check(CLI::PositiveNumber);

    CommonFlags sweep_flags;
    auto* sweep = app.add_subcommand("sweep", "run an experiment config and write result tables");
    add_common(sweep, sweep_flags, true);

    CommonFlags tune_flags;
    std::optional<int> level;
    auto* tune = app.add_subcommand("tune", "grid search only");
    add_common(tune, tune_flags, true);
    tune->add_option("--level", level, "missing-level index; omit to tune every level and write a table");

    CommonFlags wb_flags;
    std::vector<std::string> wb_files;
    int points = 200;
    auto* wb = app.add_subcommand("weibull", "fit per-task score distributions and sample the PDFs");
    add_common(wb, wb_flags, false);
    wb->add_option("files", wb_files, "task CSV files")->required()->check(CLI::ExistingFile);
    wb->add_option("--points", points, "curve samples per task")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    try {
        if (*gen) return run_generate(gen_flags, stem);
        if (*fit) return run_fit(fit_flags, ff);
        if (*sweep) return run_sweep(sweep_flags);
        if (*tune) return run_tune(tune_flags, level);
        if (*wb) return run_weibull(wb_flags, wb_files, points);
    } catch (const Failure& f) {
        return f.code;
    } catch (const std::exception& e) {
        std::cerr << "mtlgr: " << e.what() << '\n';
        return exit_numerical;
    }
    return exit_ok;
}
