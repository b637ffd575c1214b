#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "mtlgr/bench.hpp"
#include "mtlgr/error.hpp"

using namespace mtlgr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mtlgr_bench_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> out;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        out.push_back(cells);
    }
    return out;
}

// Small synthetic problem that runs in well under a second.
ExperimentConfig small_config() {
    return parse_config(R"({
        "data": {"source": "synthetic", "features": 10, "tasks": 3, "rows_per_task": 60, "sparsity": 3},
        "methods": ["rlgr", "rlgr1"],
        "missing_levels": [0.1, 0.3],
        "replications": 1,
        "tuning": {"replications": 1},
        "grids": {"mu": [0.001, 0.01], "lambda": [0.01], "delta": [0, 0.1], "rank": [2]},
        "seed": 5
    })");
}

Errc config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error for " << text;
    return Errc::invalid_argument;
}

}  // namespace

TEST(Methods, NamesRoundTrip) {
    for (auto m : {Method::mean_impute, Method::mf_lgr, Method::rlgr, Method::rlgr1}) {
        EXPECT_EQ(parse_method(method_name(m)), m);
    }
    EXPECT_STREQ(method_name(Method::mean_impute), "mean-impute");
    EXPECT_THROW(parse_method("lasso"), Error);
}

TEST(Config, Defaults) {
    const auto cfg = parse_config("{}");
    EXPECT_EQ(cfg.methods.size(), 4u);
    EXPECT_EQ(cfg.missing_levels.size(), 5u);
    EXPECT_EQ(cfg.replications, 20);
    EXPECT_EQ(cfg.tuning_replications, 3);
    EXPECT_EQ(cfg.grids.mu.size(), 6u);
    EXPECT_EQ(cfg.grids.delta.front(), 0.0);
    EXPECT_EQ(cfg.criterion, TuningCriterion::model_nmse);
    EXPECT_EQ(cfg.scope, TuningScope::per_level);
}

TEST(Config, Errors) {
    EXPECT_EQ(config_error(R"({"bogus": 1})"), Errc::config);
    EXPECT_EQ(config_error(R"({"methods": []})"), Errc::config);
    EXPECT_EQ(config_error(R"({"methods": ["lasso"]})"), Errc::config);
    EXPECT_EQ(config_error(R"({"missing_levels": [1.0]})"), Errc::config);
    EXPECT_EQ(config_error(R"({"replications": 0})"), Errc::config);
    EXPECT_EQ(config_error(R"({"grids": {"mu": []}})"), Errc::config);
    EXPECT_EQ(config_error(R"({"data": {"source": "csv", "paths": ["a.csv"]},
                               "tuning": {"criterion": "model-nmse"}})"),
              Errc::config);
    EXPECT_EQ(config_error("{not json"), Errc::config);
}

TEST(Config, CsvDefaultsToPredictionCriterion) {
    const auto cfg = parse_config(R"({"data": {"source": "csv", "paths": ["a.csv"]}})", "/base");
    EXPECT_EQ(cfg.criterion, TuningCriterion::prediction_nmse);
    EXPECT_EQ(std::get<CsvSource>(cfg.source).paths.front(), fs::path("/base/a.csv"));
}

TEST(ConfigHash, TracksSemanticFields) {
    const auto a = small_config();
    auto b = a;
    b.output_dir = "elsewhere";
    b.threads = 4;
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    auto c = a;
    c.base_seed += 1;
    EXPECT_NE(config_hash(a), config_hash(c));
    auto d = a;
    d.grids.mu.push_back(1.0);
    EXPECT_NE(config_hash(a), config_hash(d));
    EXPECT_EQ(config_hash(parse_config(canonical_config(a))), config_hash(a));
}

TEST(Tune, SinglePointGrid) {
    auto cfg = small_config();
    cfg.grids.mu = {0.01};
    cfg.grids.lambda = {0.1};
    const auto out = tune_grid(cfg, Method::rlgr, 0);
    EXPECT_EQ(out.chosen.mu, 0.01);
    EXPECT_EQ(out.chosen.lambda, 0.1);
    EXPECT_EQ(out.scores.size(), 1u);
}

TEST(Tune, ZeroMuBeatsDominatingMu) {
    auto cfg = small_config();
    cfg.grids.mu = {0.0, 1e6};
    cfg.grids.lambda = {0.01};
    const auto out = tune_grid(cfg, Method::mean_impute, 0);
    EXPECT_EQ(out.chosen.mu, 0.0);
    for (const auto& s : out.scores) {
        if (s.point.mu == 1e6) EXPECT_DOUBLE_EQ(*s.criterion, 1.0);
    }
}

TEST(Tune, TiesGoToSmallestPoint) {
    auto cfg = small_config();
    cfg.grids.mu = {1e6, 1e7};
    cfg.grids.lambda = {0.5, 0.01};
    std::sort(cfg.grids.lambda.begin(), cfg.grids.lambda.end());
    const auto out = tune_grid(cfg, Method::rlgr, 0);
    EXPECT_EQ(out.chosen.mu, 1e6);
    EXPECT_EQ(out.chosen.lambda, 0.01);
}

TEST(Tune, Rlgr1NeverWorseThanRlgrOnTuningSet) {
    auto cfg = small_config();
    cfg.grids.delta = {0.0, 0.01, 0.1, 1.0};
    for (std::size_t level = 0; level < cfg.missing_levels.size(); ++level) {
        const auto a = tune_grid(cfg, Method::rlgr, level);
        const auto b = tune_grid(cfg, Method::rlgr1, level);
        auto best = [](const TuningOutcome& o) {
            double v = std::numeric_limits<double>::infinity();
            for (const auto& s : o.scores) {
                if (s.criterion) v = std::min(v, *s.criterion);
            }
            return v;
        };
        EXPECT_LE(best(b), best(a));
    }
}

TEST(Sweep, CartesianRowCount) {
    auto cfg = small_config();
    const auto result = run_sweep(cfg);
    EXPECT_EQ(result.rows.size(), 4u);
    EXPECT_EQ(result.rows[0].method, Method::rlgr);
    EXPECT_EQ(result.rows[0].missing_fraction, 0.1);
    EXPECT_EQ(result.rows[3].method, Method::rlgr1);
    EXPECT_EQ(result.rows[3].missing_fraction, 0.3);
    for (const auto& r : result.rows) {
        ASSERT_TRUE(r.nmse_w.has_value()) << r.note;
        EXPECT_GE(*r.nmse_w, 0.0);
        EXPECT_GE(*r.nmse_gamma, 0.0);
        EXPECT_GE(*r.prediction_nmse, 0.0);
    }
}

TEST(Sweep, LevelZeroRlgrMatchesRlgr1) {
    auto cfg = small_config();
    cfg.missing_levels = {0.0};
    cfg.grids.delta = {0.0};
    const auto result = run_sweep(cfg);
    ASSERT_EQ(result.rows.size(), 2u);
    EXPECT_EQ(*result.rows[0].nmse_w, *result.rows[1].nmse_w);
}

TEST(Sweep, GlobalScopeTunesOncePerMethod) {
    auto cfg = small_config();
    cfg.scope = TuningScope::global;
    const auto result = run_sweep(cfg);
    EXPECT_EQ(result.tuning.size(), 2u);
    EXPECT_EQ(result.rows[0].hyper, result.rows[1].hyper);
}

TEST(Sweep, ByteIdenticalAcrossRunsAndThreads) {
    auto cfg = small_config();
    cfg.replications = 2;
    cfg.output_dir = scratch("det_a");
    const auto a = emit_results(run_sweep(cfg), cfg);
    cfg.output_dir = scratch("det_b");
    cfg.threads = 3;
    const auto b = emit_results(run_sweep(cfg), cfg);
    EXPECT_EQ(a.raw.filename(), b.raw.filename());
    EXPECT_EQ(slurp(a.raw), slurp(b.raw));
    EXPECT_EQ(slurp(a.aggregate), slurp(b.aggregate));
    fs::remove_all(scratch("det_a"));
    fs::remove_all(scratch("det_b"));
}

TEST(Sweep, CsvSource) {
    const fs::path dir = scratch("csv_src");
    auto data = inject_mcar(synth_generate(SynthParams{10, 2, 40, 3}, chain_graph(2), 3).first, 0.05, 4);
    const auto paths = write_task_csv(data, dir, "task");
    auto cfg = small_config();
    cfg.source = CsvSource{paths, 0.6, true};
    cfg.criterion = TuningCriterion::prediction_nmse;
    cfg.missing_levels = {0.0, 0.2};
    const auto result = run_sweep(cfg);
    ASSERT_EQ(result.rows.size(), 4u);
    for (const auto& r : result.rows) {
        EXPECT_FALSE(r.nmse_w.has_value());
        ASSERT_TRUE(r.prediction_nmse.has_value()) << r.note;
    }
    fs::remove_all(dir);
}

TEST(Emit, AggregateShapeAndStderr) {
    auto cfg = small_config();
    cfg.output_dir = scratch("agg");
    const auto files = emit_results(run_sweep(cfg), cfg);
    const auto rows = read_csv(files.aggregate);
    ASSERT_EQ(rows.size(), 5u);
    const auto& header = rows[0];
    const auto col = std::find(header.begin(), header.end(), "nmse_w_stderr") - header.begin();
    ASSERT_LT(col, static_cast<long>(header.size()));
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][col], "0");
    EXPECT_TRUE(fs::exists(files.metadata));
    EXPECT_NE(files.raw.filename().string().find(config_hash(cfg)), std::string::npos);
    fs::remove_all(cfg.output_dir);
}

TEST(Emit, AbsentMetricsReduceCount) {
    auto cfg = small_config();
    cfg.output_dir = scratch("absent");
    SweepResult result;
    ResultRow ok;
    ok.method = Method::rlgr;
    ok.missing_fraction = 0.1;
    ok.nmse_w = 0.2;
    ok.nmse_gamma = 0.1;
    ok.prediction_nmse = 0.3;
    ok.rmse = 0.4;
    ResultRow bad = ok;
    bad.replication = 1;
    bad.nmse_w.reset();
    bad.nmse_gamma.reset();
    bad.prediction_nmse.reset();
    bad.rmse.reset();
    bad.note = "degenerate column";
    result.rows = {ok, bad};
    const auto files = emit_results(result, cfg);
    const auto rows = read_csv(files.aggregate);
    ASSERT_EQ(rows.size(), 2u);
    const auto& header = rows[0];
    const auto count = std::find(header.begin(), header.end(), "nmse_w_count") - header.begin();
    const auto mean = std::find(header.begin(), header.end(), "nmse_w_mean") - header.begin();
    EXPECT_EQ(rows[1][count], "1");
    EXPECT_EQ(rows[1][mean], "0.2");
    fs::remove_all(cfg.output_dir);
}

TEST(Emit, UnwritableDirectoryIsIoError) {
    auto cfg = small_config();
    cfg.output_dir = "/proc/mtlgr_cannot_write_here";
    SweepResult result;
    ResultRow r;
    r.method = Method::rlgr;
    result.rows = {r};
    try {
        emit_results(result, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::io);
    }
}
