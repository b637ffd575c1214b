#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mtlgr/baselines.hpp"
#include "mtlgr/dataio.hpp"
#include "mtlgr/estimators.hpp"
#include "mtlgr/solver.hpp"

namespace mtlgr {

enum class Method { mean_impute, mf_lgr, rlgr, rlgr1 };

const char* method_name(Method method) noexcept;
/// Accepts the CLI/config tags `mean-impute`, `mf-lgr`, `rlgr`, `rlgr1`.
Method parse_method(const std::string& tag);

enum class TuningCriterion { model_nmse, prediction_nmse };
enum class TuningScope { per_level, global };

struct SyntheticSource {
    SynthParams params;
    int test_rows = 0;          // 0 means params.rows
    double base_missing = 0.0;  // applied before the swept level
};

struct CsvSource {
    std::vector<std::filesystem::path> paths;
    double train_fraction = 0.6;
    bool normalize = true;
};

struct GraphSpec {
    bool chain = true;
    std::vector<std::pair<int, int>> edges;  // 1-based, used when !chain
};

struct Grids {
    std::vector<double> mu{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
    std::vector<double> lambda{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
    std::vector<double> delta{0.0, 1e-3, 1e-2, 1e-1, 1.0};
    std::vector<int> rank{2, 5, 10};
};

struct ExperimentConfig {
    std::variant<SyntheticSource, CsvSource> source = SyntheticSource{};
    GraphSpec graph;
    std::vector<Method> methods{Method::mean_impute, Method::mf_lgr, Method::rlgr, Method::rlgr1};
    std::vector<double> missing_levels{0.05, 0.1, 0.2, 0.3, 0.4};
    int replications = 20;
    int tuning_replications = 3;
    Grids grids;
    TuningCriterion criterion = TuningCriterion::model_nmse;
    TuningScope scope = TuningScope::per_level;
    ThresholdVariant threshold_variant = ThresholdVariant::reflect;
    CompletionConfig completion;  // rank comes from the grid
    SolverSettings solver;
    std::uint64_t base_seed = 0;

    // Execution only; excluded from the config hash.
    std::filesystem::path output_dir = "results";
    int threads = 1;
};

/// Parses the JSON config document. Relative CSV paths resolve against
/// `base_dir`. Throws Errc::config on schema problems.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully expanded JSON with every default filled in, minus execution-only
/// fields. Two configs hash equal iff their canonical forms are equal.
std::string canonical_config(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);

TaskGraph resolve_graph(const ExperimentConfig& config);

struct GridPoint {
    double mu = 0.0;
    double lambda = 0.0;
    double delta = 0.0;  // rlgr1 only
    int rank = 0;        // mf-lgr only

    Hyperparams hyper() const { return {mu, lambda, delta}; }
    auto operator<=>(const GridPoint&) const = default;
};

struct GridScore {
    GridPoint point;
    std::optional<double> criterion;  // absent when any tuning run failed
    std::string failure;
};

struct TuningOutcome {
    Method method = Method::rlgr1;
    std::optional<std::size_t> level_index;  // empty for global tuning
    GridPoint chosen;
    std::vector<GridScore> scores;
};

/// Grid search on the tuning replications (seeds disjoint from evaluation).
/// `level_index` empty tunes once across all levels. Ties go to the
/// lexicographically smallest (mu, lambda, delta, rank).
TuningOutcome tune_grid(const ExperimentConfig& config, Method method, std::optional<std::size_t> level_index);

struct ResultRow {
    Method method = Method::rlgr1;
    double missing_fraction = 0.0;
    int replication = 0;
    std::optional<double> nmse_w;
    std::optional<double> nmse_gamma;
    std::optional<double> prediction_nmse;
    std::optional<double> rmse;
    GridPoint hyper;
    double runtime_ms = 0.0;
    bool converged = false;
    int iterations = 0;
    std::string note;  // error or warning text, empty when clean
};

struct SweepResult {
    std::vector<ResultRow> rows;  // sorted by (method, level, replication)
    std::vector<TuningOutcome> tuning;
};

SweepResult run_sweep(const ExperimentConfig& config);

struct EmittedFiles {
    std::filesystem::path raw;
    std::filesystem::path aggregate;
    std::filesystem::path timings;
    std::filesystem::path metadata;
};

/// Writes results_<hash>.csv (deterministic), aggregate_<hash>.csv (mean and
/// standard error per method and level), timings_<hash>.csv and
/// metadata_<hash>.json into config.output_dir.
EmittedFiles emit_results(const SweepResult& result, const ExperimentConfig& config);

/// Writes tuning_<hash>.csv with every grid score; returns its path.
std::filesystem::path emit_tuning(const std::vector<TuningOutcome>& outcomes, const ExperimentConfig& config);

}  // namespace mtlgr
