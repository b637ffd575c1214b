#include "mtlgr/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "mtlgr/error.hpp"

namespace mtlgr {

ImputeResult mean_impute(const MaskedTaskData& data) {
    ImputeResult out{data.values, {}};
    for (Eigen::Index j = 0; j < data.features(); ++j) {
        double sum = 0.0;
        Eigen::Index count = 0;
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            if (data.mask(i, j)) {
                sum += data.values(i, j);
                ++count;
            }
        }
        double fill = 0.0;
        if (count == 0) {
            out.warnings.push_back("column " + std::to_string(j) + " has no observed entries; filled with 0");
        } else {
            fill = sum / static_cast<double>(count);
        }
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            if (!data.mask(i, j)) out.values(i, j) = fill;
        }
    }
    return out;
}

namespace {

Eigen::VectorXd solve_normal(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double ridge) {
    if (ridge > 0.0) return a.ldlt().solve(b);
    return a.completeOrthogonalDecomposition().solve(b);
}

double completion_objective(const MaskedTaskData& data, const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                            double ridge) {
    const Eigen::MatrixXd fit = u * v.transpose();
    double loss = 0.0;
    for (Eigen::Index j = 0; j < data.features(); ++j) {
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            if (data.mask(i, j)) {
                const double r = data.values(i, j) - fit(i, j);
                loss += r * r;
            }
        }
    }
    return loss + ridge * (u.squaredNorm() + v.squaredNorm());
}

}  // namespace

CompletionReport mf_complete_report(const MaskedTaskData& data, const CompletionConfig& config) {
    const Eigen::Index n = data.rows();
    const Eigen::Index p = data.features();
    const int r = config.rank;
    if (r < 1 || r > std::min(n, p)) {
        fail(Errc::invalid_argument, "completion rank " + std::to_string(r) + " outside 1.." +
                                         std::to_string(std::min(n, p)));
    }
    if (config.max_iters < 1) fail(Errc::invalid_argument, "completion max_iters must be positive");
    if (!(config.tol > 0.0)) fail(Errc::invalid_argument, "completion tol must be positive");
    if (!(config.ridge >= 0.0)) fail(Errc::invalid_argument, "completion ridge must be nonnegative");

    const Eigen::MatrixXd zero_filled = data.mask.select(data.values, 0.0);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(zero_filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd root = svd.singularValues().head(r).cwiseSqrt();
    Eigen::MatrixXd u = svd.matrixU().leftCols(r) * root.asDiagonal();
    Eigen::MatrixXd v = svd.matrixV().leftCols(r) * root.asDiagonal();

    CompletionReport report;
    double prev = completion_objective(data, u, v, config.ridge);
    report.objective_trace.push_back(prev);

    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(r, r);
    for (int it = 0; it < config.max_iters; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::MatrixXd a = config.ridge * eye;
            Eigen::VectorXd b = Eigen::VectorXd::Zero(r);
            for (Eigen::Index j = 0; j < p; ++j) {
                if (!data.mask(i, j)) continue;
                a.noalias() += v.row(j).transpose() * v.row(j);
                b.noalias() += data.values(i, j) * v.row(j).transpose();
            }
            u.row(i) = solve_normal(a, b, config.ridge).transpose();
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            Eigen::MatrixXd a = config.ridge * eye;
            Eigen::VectorXd b = Eigen::VectorXd::Zero(r);
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!data.mask(i, j)) continue;
                a.noalias() += u.row(i).transpose() * u.row(i);
                b.noalias() += data.values(i, j) * u.row(i).transpose();
            }
            v.row(j) = solve_normal(a, b, config.ridge).transpose();
        }
        const double obj = completion_objective(data, u, v, config.ridge);
        report.objective_trace.push_back(obj);
        report.iterations = it + 1;
        if (!std::isfinite(obj)) fail(Errc::numerical_failure, "matrix completion diverged");
        const double scale = std::max(std::abs(prev), std::abs(obj));
        const double rel = scale > 0.0 ? std::abs(prev - obj) / scale : 0.0;
        prev = obj;
        if (rel < config.tol) break;
    }
    report.completed = u * v.transpose();
    return report;
}

}  // namespace mtlgr
