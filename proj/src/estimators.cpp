#include "mtlgr/estimators.hpp"

#include <cmath>
#include <string>

#include "mtlgr/error.hpp"

namespace mtlgr {

namespace {

void check_columns_observed(const Mask& mask) {
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
        if (!mask.col(j).any()) {
            fail(Errc::degenerate_column, "feature column " + std::to_string(j) + " has no observed entries");
        }
    }
}

// Shared by the complete-data and plug-in paths so that rho = 0 reproduces
// the empirical pair bit for bit.
Eigen::MatrixXd scaled_gram(const Eigen::MatrixXd& x) {
    const double n = static_cast<double>(x.rows());
    Eigen::MatrixXd g = x.transpose() * x;
    g /= n;
    return g;
}

Eigen::VectorXd scaled_cross(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const double n = static_cast<double>(x.rows());
    Eigen::VectorXd c = x.transpose() * y;
    c /= n;
    return c;
}

}  // namespace

MaskedTaskData make_task(Eigen::MatrixXd values, Mask mask, Eigen::VectorXd response, std::optional<double> rate) {
    if (values.rows() < 1 || values.cols() < 1) {
        fail(Errc::invalid_argument, "task needs at least one row and one feature");
    }
    if (mask.rows() != values.rows() || mask.cols() != values.cols()) {
        fail(Errc::invalid_argument, "mask shape does not match values");
    }
    if (response.size() != values.rows()) {
        fail(Errc::invalid_argument, "response length " + std::to_string(response.size()) + " does not match " +
                                         std::to_string(values.rows()) + " rows");
    }
    if (!response.allFinite()) {
        fail(Errc::invalid_data, "response contains non-finite values");
    }
    const double estimated = missing_rate(mask);
    const double rho = rate.value_or(estimated);
    if (!(rho >= 0.0 && rho < 1.0)) {
        fail(Errc::invalid_argument, "missing rate must lie in [0, 1), got " + std::to_string(rho));
    }
    return MaskedTaskData{std::move(values), std::move(mask), std::move(response), rho};
}

MaskedTaskData complete_task(Eigen::MatrixXd values, Eigen::VectorXd response) {
    Mask mask = Mask::Constant(values.rows(), values.cols(), true);
    return make_task(std::move(values), std::move(mask), std::move(response));
}

const char* moment_kind_name(MomentKind kind) noexcept {
    switch (kind) {
    case MomentKind::empirical: return "empirical";
    case MomentKind::rlgr: return "rlgr";
    case MomentKind::rlgr1: return "rlgr1";
    }
    return "unknown";
}

MomentPair make_moments(Eigen::MatrixXd gamma_mat, Eigen::VectorXd gamma_vec, MomentKind kind) {
    if (gamma_mat.rows() != gamma_mat.cols() || gamma_mat.rows() != gamma_vec.size()) {
        fail(Errc::invalid_argument, "moment pair dimensions disagree");
    }
    Eigen::MatrixXd sym = (gamma_mat + gamma_mat.transpose()) * 0.5;
    return MomentPair{std::move(sym), std::move(gamma_vec), kind};
}

double missing_rate(const Mask& mask) {
    if (mask.size() == 0) fail(Errc::invalid_argument, "empty mask");
    check_columns_observed(mask);
    const auto observed = mask.count();
    return static_cast<double>(mask.size() - observed) / static_cast<double>(mask.size());
}

Eigen::MatrixXd zero_fill_scale(const MaskedTaskData& data) {
    check_columns_observed(data.mask);
    const double rho = data.missing_rate;
    if (!(rho >= 0.0 && rho < 1.0)) {
        fail(Errc::degenerate_column, "missing rate " + std::to_string(rho) + " leaves nothing to rescale");
    }
    Eigen::MatrixXd z = data.mask.select(data.values, 0.0);
    if (rho > 0.0) z /= (1.0 - rho);
    return z;
}

MomentPair empirical_moments(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() == 0) fail(Errc::invalid_argument, "empirical moments need at least one row");
    if (y.size() != x.rows()) fail(Errc::invalid_argument, "response length does not match rows");
    return make_moments(scaled_gram(x), scaled_cross(x, y), MomentKind::empirical);
}

MomentPair plugin_moments_rlgr(const MaskedTaskData& data) {
    const Eigen::MatrixXd z = zero_fill_scale(data);
    const double rho = data.missing_rate;
    Eigen::MatrixXd g = scaled_gram(z);
    g.diagonal() -= rho * g.diagonal();
    return make_moments(std::move(g), scaled_cross(z, data.response), MomentKind::rlgr);
}

Eigen::VectorXd eig_soft_threshold(const Eigen::VectorXd& eigenvalues, double delta, ThresholdVariant variant) {
    if (!(delta >= 0.0)) fail(Errc::invalid_argument, "threshold delta must be nonnegative");
    if (delta == 0.0) return eigenvalues;
    Eigen::VectorXd out(eigenvalues.size());
    for (Eigen::Index j = 0; j < eigenvalues.size(); ++j) {
        const double u = eigenvalues[j];
        if (u >= delta) {
            out[j] = u - delta;
        } else if (u <= -delta) {
            out[j] = variant == ThresholdVariant::reflect ? delta - u : u + delta;
        } else {
            out[j] = 0.0;
        }
    }
    return out;
}

MomentPair threshold_spectrum(const MomentPair& base, double delta, ThresholdVariant variant) {
    if (!(delta >= 0.0)) fail(Errc::invalid_argument, "threshold delta must be nonnegative");
    if (delta == 0.0) return MomentPair{base.gamma_mat, base.gamma_vec, MomentKind::rlgr1};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(base.gamma_mat);
    if (eig.info() != Eigen::Success) {
        fail(Errc::numerical_failure, "eigendecomposition of the covariance estimate failed");
    }
    const Eigen::VectorXd d = eig_soft_threshold(eig.eigenvalues(), delta, variant);
    const Eigen::MatrixXd& q = eig.eigenvectors();
    Eigen::MatrixXd g = q * d.asDiagonal() * q.transpose();
    return make_moments(std::move(g), base.gamma_vec, MomentKind::rlgr1);
}

MomentPair plugin_moments_rlgr1(const MaskedTaskData& data, double delta, ThresholdVariant variant) {
    return threshold_spectrum(plugin_moments_rlgr(data), delta, variant);
}

}  // namespace mtlgr
