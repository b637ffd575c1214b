#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtlgr/estimators.hpp"

namespace mtlgr {

struct ImputeResult {
    Eigen::MatrixXd values;
    std::vector<std::string> warnings;
};

/// Column-mean imputation. Observed entries are copied verbatim; an
/// all-missing column is zero-filled and reported in `warnings`.
ImputeResult mean_impute(const MaskedTaskData& data);

struct CompletionConfig {
    int rank = 5;
    int max_iters = 200;
    double tol = 1e-6;
    double ridge = 1e-6;
};

struct CompletionReport {
    Eigen::MatrixXd completed;
    // Observed-entry squared error plus ridge * (|U|^2 + |V|^2), one entry
    // per half-sweep pair, starting with the spectral initialization.
    std::vector<double> objective_trace;
    int iterations = 0;
};

/// Low-rank completion by ridge-regularized alternating least squares,
/// initialized from the top-`rank` SVD of the zero-filled matrix. Returns
/// U V^T everywhere, including observed entries.
CompletionReport mf_complete_report(const MaskedTaskData& data, const CompletionConfig& config);

inline Eigen::MatrixXd mf_complete(const MaskedTaskData& data, const CompletionConfig& config) {
    return mf_complete_report(data, config).completed;
}

}  // namespace mtlgr
