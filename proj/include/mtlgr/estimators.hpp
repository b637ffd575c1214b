#pragma once

#include <optional>

#include <Eigen/Dense>

namespace mtlgr {

/// Observation mask, true = observed.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// One task's design matrix with its missingness mask. `values` is
/// unspecified wherever `mask` is false. `missing_rate` is the per-task
/// scalar rho used by the plug-in estimators.
struct MaskedTaskData {
    Eigen::MatrixXd values;
    Mask mask;
    Eigen::VectorXd response;
    double missing_rate = 0.0;

    Eigen::Index rows() const noexcept { return values.rows(); }
    Eigen::Index features() const noexcept { return values.cols(); }
};

/// Builds a task and checks its invariants: matching shapes, finite
/// response, every feature column observed at least once. The rate is
/// estimated from the mask unless supplied.
MaskedTaskData make_task(Eigen::MatrixXd values, Mask mask, Eigen::VectorXd response,
                         std::optional<double> rate = std::nullopt);

/// Fully observed task.
MaskedTaskData complete_task(Eigen::MatrixXd values, Eigen::VectorXd response);

enum class MomentKind { empirical, rlgr, rlgr1 };

const char* moment_kind_name(MomentKind kind) noexcept;

/// Second-moment pair (Gamma, gamma) consumed by the solver.
struct MomentPair {
    Eigen::MatrixXd gamma_mat;
    Eigen::VectorXd gamma_vec;
    MomentKind kind = MomentKind::empirical;
};

/// Symmetrizes `gamma_mat` as (G + G^T) / 2 and packs the pair.
MomentPair make_moments(Eigen::MatrixXd gamma_mat, Eigen::VectorXd gamma_vec, MomentKind kind);

/// Eigenvalue threshold applied by R-LGR1. `reflect` maps u <= -delta to
/// delta - u (always nonnegative); `standard` is ordinary soft thresholding.
enum class ThresholdVariant { reflect, standard };

/// Fraction of false entries. Throws Errc::degenerate_column when a column
/// is entirely unobserved, Errc::invalid_argument on an empty mask.
double missing_rate(const Mask& mask);

/// Z = X / (1 - rho) with missing entries set to 0.
Eigen::MatrixXd zero_fill_scale(const MaskedTaskData& data);

/// (X^T X / n, X^T y / n).
MomentPair empirical_moments(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Missing-data corrected pair: Gamma = Z^T Z / n - rho * diag(Z^T Z / n),
/// gamma = Z^T y / n. Reduces exactly to empirical_moments when rho = 0.
MomentPair plugin_moments_rlgr(const MaskedTaskData& data);

/// Element-wise three-branch threshold. delta = 0 is the identity map.
Eigen::VectorXd eig_soft_threshold(const Eigen::VectorXd& eigenvalues, double delta,
                                   ThresholdVariant variant = ThresholdVariant::reflect);

/// Re-thresholds the spectrum of an existing Gamma estimate: Q T(d) Q^T.
/// gamma_vec is carried over unchanged. delta = 0 returns `base.gamma_mat`
/// untouched.
MomentPair threshold_spectrum(const MomentPair& base, double delta,
                              ThresholdVariant variant = ThresholdVariant::reflect);

/// R-LGR1 pair: threshold_spectrum(plugin_moments_rlgr(data), delta).
MomentPair plugin_moments_rlgr1(const MaskedTaskData& data, double delta,
                                ThresholdVariant variant = ThresholdVariant::reflect);

}  // namespace mtlgr
