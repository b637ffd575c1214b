#pragma once

#include <Eigen/Dense>
#include <random>

#include "mtlgr/estimators.hpp"
#include "mtlgr/random.hpp"

namespace mtlgr::test {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n01(rng);
    return m;
}

// Bernoulli mask; resamples until no column is fully missing.
inline Mask bernoulli_mask(Eigen::Index rows, Eigen::Index cols, double rho, Rng& rng) {
    std::bernoulli_distribution keep(1.0 - rho);
    for (;;) {
        Mask m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = keep(rng);
        if ((m.colwise().count() > 0).all()) return m;
    }
}

inline double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / b.norm();
}

// Coordinate descent on 1/2 w'Gw - w'g + alpha |w|_1.
inline Eigen::VectorXd lasso_cd(const Eigen::MatrixXd& gram, const Eigen::VectorXd& g, double alpha,
                                int sweeps = 100000, double tol = 1e-14) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(g.size());
    for (int s = 0; s < sweeps; ++s) {
        double change = 0.0;
        for (Eigen::Index j = 0; j < w.size(); ++j) {
            const double r = g(j) - gram.row(j).dot(w) + gram(j, j) * w(j);
            const double z = std::abs(r) > alpha ? (r > 0 ? r - alpha : r + alpha) : 0.0;
            const double next = z / gram(j, j);
            change = std::max(change, std::abs(next - w(j)));
            w(j) = next;
        }
        if (change < tol) break;
    }
    return w;
}

}  // namespace mtlgr::test
