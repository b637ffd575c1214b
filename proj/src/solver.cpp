#include "mtlgr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mtlgr/error.hpp"

namespace mtlgr {

namespace {

void check_dims(const ModelMatrix& w, std::span<const MomentPair> moments, const Eigen::MatrixXi& incidence) {
    const auto k = w.tasks();
    if (static_cast<Eigen::Index>(moments.size()) != k) {
        fail(Errc::invalid_argument, "got " + std::to_string(moments.size()) + " moment pairs for " +
                                         std::to_string(k) + " model columns");
    }
    if (incidence.rows() != k) {
        fail(Errc::invalid_argument, "incidence matrix has " + std::to_string(incidence.rows()) +
                                         " rows, expected " + std::to_string(k));
    }
    for (const auto& m : moments) {
        if (m.gamma_mat.rows() != w.features() || m.gamma_mat.cols() != w.features() ||
            m.gamma_vec.size() != w.features()) {
            fail(Errc::invalid_argument, "moment pair dimension does not match " + std::to_string(w.features()) +
                                             " features");
        }
    }
}

void check_hyper(const Hyperparams& hyper) {
    if (!(hyper.mu >= 0.0) || !(hyper.lambda >= 0.0) || !(hyper.delta >= 0.0)) {
        fail(Errc::invalid_argument, "hyperparameters must be nonnegative");
    }
}

double graph_penalty(const Eigen::MatrixXd& w, const Eigen::MatrixXi& incidence) {
    if (incidence.cols() == 0) return 0.0;
    return (w * incidence.cast<double>()).squaredNorm();
}

// Quadratic part given cached products G_i W_i.
double quadratic_part(const Eigen::MatrixXd& w, const Eigen::MatrixXd& gw, std::span<const MomentPair> moments) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < w.cols(); ++i) {
        const auto& m = moments[static_cast<std::size_t>(i)];
        total += 0.5 * w.col(i).dot(gw.col(i)) - w.col(i).dot(m.gamma_vec);
    }
    return total;
}

Eigen::MatrixXd gamma_times(const Eigen::MatrixXd& w, std::span<const MomentPair> moments) {
    Eigen::MatrixXd out(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.cols(); ++i) {
        out.col(i).noalias() = moments[static_cast<std::size_t>(i)].gamma_mat * w.col(i);
    }
    return out;
}

double spectral_norm(const Eigen::MatrixXd& g) {
    const Eigen::Index p = g.rows();
    Eigen::VectorXd v(p);
    for (Eigen::Index j = 0; j < p; ++j) v[j] = 1.0 + static_cast<double>(j) / static_cast<double>(p);
    v.normalize();
    double estimate = 0.0;
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd gv = g * v;
        const double norm = gv.norm();
        if (norm == 0.0) return estimate;
        estimate = norm;
        v = gv / norm;
    }
    return estimate;
}

}  // namespace

double smooth_objective(const ModelMatrix& w, std::span<const MomentPair> moments, const Hyperparams& hyper,
                        const Eigen::MatrixXi& incidence) {
    check_dims(w, moments, incidence);
    check_hyper(hyper);
    const Eigen::MatrixXd gw = gamma_times(w.coefficients, moments);
    return quadratic_part(w.coefficients, gw, moments) + 0.5 * hyper.lambda * graph_penalty(w.coefficients, incidence);
}

double objective_value(const ModelMatrix& w, std::span<const MomentPair> moments, const Hyperparams& hyper,
                       const Eigen::MatrixXi& incidence) {
    return smooth_objective(w, moments, hyper, incidence) + 0.5 * hyper.mu * w.coefficients.lpNorm<1>();
}

Eigen::MatrixXd smooth_gradient(const ModelMatrix& w, std::span<const MomentPair> moments, const Hyperparams& hyper,
                                const Eigen::MatrixXi& incidence) {
    check_dims(w, moments, incidence);
    check_hyper(hyper);
    Eigen::MatrixXd grad = gamma_times(w.coefficients, moments);
    for (Eigen::Index i = 0; i < w.tasks(); ++i) grad.col(i) -= moments[static_cast<std::size_t>(i)].gamma_vec;
    if (incidence.cols() > 0 && hyper.lambda != 0.0) {
        const Eigen::MatrixXd r = incidence.cast<double>();
        grad.noalias() += hyper.lambda * (w.coefficients * r) * r.transpose();
    }
    return grad;
}

Eigen::MatrixXd prox_l1(const Eigen::MatrixXd& w, double threshold) {
    if (!(threshold >= 0.0)) fail(Errc::invalid_argument, "prox threshold must be nonnegative");
    return w.unaryExpr([threshold](double x) {
        const double shrunk = std::abs(x) - threshold;
        if (shrunk <= 0.0) return 0.0;
        return x > 0.0 ? shrunk : -shrunk;
    });
}

SolverReport fit(std::span<const MomentPair> moments, const Hyperparams& hyper, const Eigen::MatrixXi& incidence,
                 const SolverSettings& settings) {
    if (moments.empty()) fail(Errc::invalid_argument, "fit needs at least one task");
    const Eigen::Index p = moments.front().gamma_vec.size();
    const Eigen::Index k = static_cast<Eigen::Index>(moments.size());
    if (settings.max_iters < 1 || !(settings.tol > 0.0)) {
        fail(Errc::invalid_argument, "solver needs max_iters >= 1 and tol > 0");
    }
    if (!(settings.backtrack_factor > 0.0 && settings.backtrack_factor < 1.0)) {
        fail(Errc::invalid_argument, "backtrack factor must lie in (0, 1)");
    }

    SolverReport report;
    report.model.coefficients = Eigen::MatrixXd::Zero(p, k);
    check_dims(report.model, moments, incidence);
    check_hyper(hyper);

    const Eigen::MatrixXd lap = (incidence * incidence.transpose()).cast<double>();
    const double l1_weight = 0.5 * hyper.mu;

    double step = 0.0;
    if (settings.initial_step) {
        step = *settings.initial_step;
        if (!(step > 0.0)) fail(Errc::invalid_argument, "initial step must be positive");
    } else {
        double lip = 0.0;
        for (const auto& m : moments) lip = std::max(lip, spectral_norm(m.gamma_mat));
        const int max_degree = incidence.size() == 0 ? 0 : incidence.cwiseAbs().rowwise().sum().maxCoeff();
        lip += hyper.lambda * 2.0 * max_degree;
        step = lip > 0.0 ? 1.0 / lip : 1.0;
    }

    auto objective_at = [&](const Eigen::MatrixXd& w, const Eigen::MatrixXd& gw) {
        return quadratic_part(w, gw, moments) + 0.5 * hyper.lambda * (w * lap).cwiseProduct(w).sum() +
               l1_weight * w.lpNorm<1>();
    };

    Eigen::MatrixXd& w = report.model.coefficients;
    Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(p, k);
    double current = objective_at(w, gw);
    report.objective_trace.push_back(current);

    constexpr int max_backtracks = 200;
    for (int it = 1; it <= settings.max_iters; ++it) {
        Eigen::MatrixXd grad = gw;
        for (Eigen::Index i = 0; i < k; ++i) grad.col(i) -= moments[static_cast<std::size_t>(i)].gamma_vec;
        if (hyper.lambda != 0.0) grad.noalias() += hyper.lambda * w * lap;

        Eigen::MatrixXd candidate;
        Eigen::MatrixXd candidate_gw;
        double next = current;
        bool accepted = false;
        for (int bt = 0; bt <= max_backtracks; ++bt) {
            candidate = prox_l1(w - step * grad, step * l1_weight);
            candidate_gw = gamma_times(candidate, moments);
            next = objective_at(candidate, candidate_gw);
            if (!std::isfinite(next)) {
                fail(Errc::numerical_failure, "objective became non-finite at iteration " + std::to_string(it));
            }
            const double moved = (candidate - w).squaredNorm();
            if (next <= current - settings.sufficient_decrease / (2.0 * step) * moved) {
                accepted = true;
                break;
            }
            step *= settings.backtrack_factor;
        }
        report.iterations = it;
        report.final_step = step;
        if (!accepted) break;

        const double scale = std::max(std::abs(current), std::abs(next));
        const double rel = scale > 0.0 ? std::abs(current - next) / scale : 0.0;
        w = std::move(candidate);
        gw = std::move(candidate_gw);
        current = next;
        report.objective_trace.push_back(current);
        if (rel < settings.tol) {
            report.converged = true;
            break;
        }
    }
    report.final_step = step;
    return report;
}

Eigen::VectorXd predict(const Eigen::MatrixXd& x, const Eigen::VectorXd& weights) {
    if (x.cols() != weights.size()) {
        fail(Errc::invalid_argument, "design has " + std::to_string(x.cols()) + " features but weights have " +
                                         std::to_string(weights.size()));
    }
    return x * weights;
}

}  // namespace mtlgr
