#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mtlgr/estimators.hpp"

namespace mtlgr {

/// p x K coefficient matrix, column i holds task i's weights.
struct ModelMatrix {
    Eigen::MatrixXd coefficients;

    Eigen::Index features() const noexcept { return coefficients.rows(); }
    Eigen::Index tasks() const noexcept { return coefficients.cols(); }
};

struct Hyperparams {
    double mu = 0.0;      // l1 weight, applied as (mu / 2) * |W|_1
    double lambda = 0.0;  // graph weight, applied as (lambda / 2) * |W R|_F^2
    double delta = 0.0;   // eigenvalue threshold, only read by R-LGR1
};

struct SolverSettings {
    int max_iters = 5000;
    double tol = 1e-6;
    std::optional<double> initial_step;
    double backtrack_factor = 0.5;
    double sufficient_decrease = 1e-4;
};

struct SolverReport {
    ModelMatrix model;
    std::vector<double> objective_trace;  // starts with the value at W = 0
    int iterations = 0;
    bool converged = false;
    double final_step = 0.0;
};

/// sum_i [0.5 W_i^T G_i W_i - W_i^T g_i] + (mu/2)|W|_1 + (lambda/2)|W R|_F^2
double objective_value(const ModelMatrix& w, std::span<const MomentPair> moments, const Hyperparams& hyper,
                       const Eigen::MatrixXi& incidence);

/// Same objective without the l1 term.
double smooth_objective(const ModelMatrix& w, std::span<const MomentPair> moments, const Hyperparams& hyper,
                        const Eigen::MatrixXi& incidence);

/// Column i: G_i W_i - g_i + lambda * (W R R^T)_i.
Eigen::MatrixXd smooth_gradient(const ModelMatrix& w, std::span<const MomentPair> moments,
                                const Hyperparams& hyper, const Eigen::MatrixXi& incidence);

/// Entrywise sign(w) * max(|w| - threshold, 0); |w| == threshold maps to 0.
Eigen::MatrixXd prox_l1(const Eigen::MatrixXd& w, double threshold);

/// Proximal gradient from W = 0 with backtracking. Throws
/// Errc::numerical_failure if the objective stops being finite.
SolverReport fit(std::span<const MomentPair> moments, const Hyperparams& hyper, const Eigen::MatrixXi& incidence,
                 const SolverSettings& settings = {});

Eigen::VectorXd predict(const Eigen::MatrixXd& x, const Eigen::VectorXd& weights);

}  // namespace mtlgr
