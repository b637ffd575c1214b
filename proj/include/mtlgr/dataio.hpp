#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mtlgr/estimators.hpp"
#include "mtlgr/solver.hpp"
#include "mtlgr/taskgraph.hpp"

namespace mtlgr {

enum class SplitTag { full, train, test };
enum class Provenance { synthetic, csv };

struct DatasetBundle {
    std::vector<MaskedTaskData> tasks;
    TaskGraph graph;
    SplitTag split = SplitTag::full;
    Provenance provenance = Provenance::synthetic;
    std::vector<std::string> feature_names;

    int task_count() const noexcept { return static_cast<int>(tasks.size()); }
    Eigen::Index features() const noexcept { return tasks.empty() ? 0 : tasks.front().features(); }
};

// ---------------------------------------------------------------------------
// Synthetic data

/// How the sparse supports of neighbouring tasks relate. `correlated` keeps
/// ceil(sparsity / 2) indices from the lowest-numbered neighbour and perturbs
/// their values; `shared` keeps the whole support; `independent` redraws it.
enum class SupportMode { correlated, shared, independent };

struct SynthParams {
    int features = 50;
    int tasks = 5;
    int rows = 100;
    int sparsity = 7;
    double noise_std = 0.1;
    SupportMode support = SupportMode::correlated;
    // Every task observes the same rows of one design matrix (the same
    // patients measured at different visits).
    bool shared_features = false;
};

struct SyntheticGroundTruth {
    ModelMatrix true_model;
    std::vector<Eigen::MatrixXd> complete_x;
    double noise_std = 0.0;
    std::vector<MomentPair> true_moments;
};

/// Draws W, then complete X ~ N(0, 1) and y = X W + noise. Deterministic in
/// `seed`.
std::pair<DatasetBundle, SyntheticGroundTruth> synth_generate(const SynthParams& params, const TaskGraph& graph,
                                                              std::uint64_t seed);

/// Fresh complete observations from a known model; used for held-out
/// prediction on synthetic data.
DatasetBundle synth_sample(const ModelMatrix& model, const TaskGraph& graph, int rows, double noise_std,
                           bool shared_features, std::uint64_t seed);

/// Masks exactly floor(fraction * observed) additional entries per task,
/// chosen uniformly among the currently observed ones.
DatasetBundle inject_mcar(const DatasetBundle& bundle, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV

/// One task per file. Header row names the feature columns then `target`.
/// Empty cells and NA (any case) are missing. The graph defaults to a chain
/// over the files in the order given.
DatasetBundle load_task_csv(std::span<const std::filesystem::path> paths);

/// Writes `<stem>_<i>.csv` for i = 1..K and returns the paths.
std::vector<std::filesystem::path> write_task_csv(const DatasetBundle& bundle, const std::filesystem::path& dir,
                                                  const std::string& stem);

/// Shortest round-trip decimal form.
std::string format_double(double value);

// ---------------------------------------------------------------------------
// Preprocessing

/// Per task, per column l2 norm over observed entries.
std::vector<Eigen::VectorXd> column_norms(const DatasetBundle& bundle);

/// Divides observed entries by the given per-task column norms.
DatasetBundle scale_columns(const DatasetBundle& bundle, const std::vector<Eigen::VectorXd>& norms);

/// scale_columns(bundle, column_norms(bundle)); zero-norm columns throw
/// Errc::degenerate_column.
DatasetBundle l2_normalize(const DatasetBundle& bundle);

std::pair<DatasetBundle, DatasetBundle> train_test_split(const DatasetBundle& bundle, double train_fraction,
                                                         std::uint64_t seed);

/// Column means of the observed entries (0 for an unobserved column).
Eigen::VectorXd observed_column_means(const MaskedTaskData& task);

/// Copy of `task.values` with masked entries replaced by `fill[column]`.
Eigen::MatrixXd fill_missing(const MaskedTaskData& task, const Eigen::VectorXd& fill);

// ---------------------------------------------------------------------------
// Metrics

double nmse_model(const ModelMatrix& estimate, const ModelMatrix& truth);
double nmse_cov(std::span<const Eigen::MatrixXd> estimates, std::span<const Eigen::MatrixXd> truths);
double prediction_nmse(std::span<const Eigen::VectorXd> predictions, std::span<const Eigen::VectorXd> actuals);
/// sqrt of the squared error pooled over every prediction of every task.
double prediction_rmse(std::span<const Eigen::VectorXd> predictions, std::span<const Eigen::VectorXd> actuals);

// ---------------------------------------------------------------------------
// Weibull

struct WeibullFit {
    double shape = 0.0;
    double scale = 0.0;
    int iterations = 0;
    bool capped = false;  // shape hit max_shape (zero-variance samples)
};

/// Maximum-likelihood fit. Shape solves the profile score equation by
/// safeguarded Newton; scale follows in closed form.
WeibullFit weibull_fit(std::span<const double> samples, double max_shape = 1e4);

double weibull_pdf(double x, double shape, double scale);

}  // namespace mtlgr
