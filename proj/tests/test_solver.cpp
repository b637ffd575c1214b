#include <gtest/gtest.h>

#include <vector>

#include "mtlgr/error.hpp"
#include "mtlgr/solver.hpp"
#include "mtlgr/taskgraph.hpp"
#include "testutil.hpp"

using namespace mtlgr;

namespace {

std::vector<MomentPair> random_moments(int p, int k, int n, Rng& rng) {
    std::vector<MomentPair> out;
    for (int t = 0; t < k; ++t) {
        const Eigen::MatrixXd x = test::gaussian(n, p, rng);
        out.push_back(empirical_moments(x, test::gaussian(n, 1, rng)));
    }
    return out;
}

ModelMatrix model(Eigen::MatrixXd w) { return ModelMatrix{std::move(w)}; }

}  // namespace

TEST(Objective, ZeroModelIsZero) {
    Rng rng(1);
    const auto m = random_moments(4, 3, 10, rng);
    const auto r = build_incidence(chain_graph(3));
    EXPECT_EQ(objective_value(model(Eigen::MatrixXd::Zero(4, 3)), m, {0.3, 0.7, 0}, r), 0.0);
}

TEST(Objective, PureQuadratic) {
    const std::vector<MomentPair> m{make_moments(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1),
                                                 MomentKind::empirical)};
    const auto r = build_incidence(chain_graph(1));
    EXPECT_DOUBLE_EQ(objective_value(model(Eigen::MatrixXd::Constant(1, 1, 3.0)), m, {}, r), 4.5);
}

TEST(Objective, GraphPenalty) {
    const auto zero = make_moments(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1), MomentKind::empirical);
    const std::vector<MomentPair> m{zero, zero};
    Eigen::MatrixXd w(1, 2);
    w << 1, -1;
    EXPECT_DOUBLE_EQ(objective_value(model(w), m, {0.0, 2.0, 0.0}, build_incidence(chain_graph(2))), 4.0);
}

TEST(Gradient, IdentityQuadratic) {
    const std::vector<MomentPair> m{make_moments(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3),
                                                 MomentKind::empirical)};
    const Eigen::MatrixXd w = Eigen::Vector3d(1, -2, 0.5);
    EXPECT_EQ(smooth_gradient(model(w), m, {}, build_incidence(chain_graph(1))), w);
}

TEST(Gradient, LaplacianOnly) {
    const auto zero = make_moments(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2), MomentKind::empirical);
    const std::vector<MomentPair> m{zero, zero};
    Eigen::MatrixXd w(2, 2);
    w << 1, 4, -3, 2;
    Eigen::MatrixXd expected(2, 2);
    expected << -3, 3, -5, 5;
    EXPECT_EQ(smooth_gradient(model(w), m, {0, 1, 0}, build_incidence(chain_graph(2))), expected);
}

TEST(Gradient, MatchesCentralDifferences) {
    Rng rng(31);
    const auto m = random_moments(4, 3, 15, rng);
    const auto r = build_incidence(chain_graph(3));
    const Hyperparams h{0.0, 0.8, 0.0};
    const Eigen::MatrixXd w = test::gaussian(4, 3, rng);
    const Eigen::MatrixXd g = smooth_gradient(model(w), m, h, r);
    Eigen::MatrixXd fd(4, 3);
    const double eps = 1e-6;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        Eigen::MatrixXd plus = w;
        Eigen::MatrixXd minus = w;
        plus(i) += eps;
        minus(i) -= eps;
        fd(i) = (objective_value(model(plus), m, h, r) - objective_value(model(minus), m, h, r)) / (2 * eps);
    }
    EXPECT_LT((g - fd).norm() / g.norm(), 1e-5);
}

TEST(Prox, SoftThreshold) {
    const Eigen::MatrixXd w = Eigen::Vector3d(1.5, -0.3, -2.0);
    EXPECT_DOUBLE_EQ(prox_l1(w, 1.0)(0), 0.5);
    EXPECT_EQ(prox_l1(w, 0.5)(1), 0.0);
    EXPECT_DOUBLE_EQ(prox_l1(w, 0.5)(2), -1.5);
    EXPECT_EQ(prox_l1(Eigen::MatrixXd::Constant(1, 1, 0.5), 0.5)(0), 0.0);
}

TEST(Fit, LargeMuGivesZero) {
    Rng rng(41);
    const auto m = random_moments(6, 3, 40, rng);
    double gmax = 0.0;
    for (const auto& mp : m) gmax = std::max(gmax, mp.gamma_vec.cwiseAbs().maxCoeff());
    const auto rep = fit(m, {2.0 * gmax, 0.37, 0.0}, build_incidence(chain_graph(3)));
    EXPECT_TRUE(rep.model.coefficients.isZero(0.0));
    EXPECT_TRUE(rep.converged);
}

TEST(Fit, LassoMatchesReference) {
    // Reference coefficients from an external coordinate-descent LASSO on the same instance.
    const int n = 50;
    const int p = 5;
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    const Eigen::VectorXd wt = (Eigen::VectorXd(p) << 1.5, 0, -2.0, 0.5, 0).finished();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) x(i, j) = std::sin(0.7 * (i + 1) * (j + 1) + 0.3 * j);
    }
    for (int i = 0; i < n; ++i) y(i) = x.row(i).dot(wt) + 0.1 * std::cos(1.3 * i);
    const std::vector<MomentPair> m{empirical_moments(x, y)};
    SolverSettings s;
    s.tol = 1e-14;
    s.max_iters = 200000;
    const auto r = build_incidence(chain_graph(1));

    const auto a = fit(m, {0.02, 0.0, 0.0}, r, s).model.coefficients;
    const double ref_a[] = {1.47528568942621, 0.0, -1.981781923154219, 0.47798716839528776, 0.0};
    const auto b = fit(m, {0.2, 0.0, 0.0}, r, s).model.coefficients;
    const double ref_b[] = {1.2893359679412368, 0.0, -1.8078942175526849, 0.2921295152452628, 0.0};
    for (int j = 0; j < p; ++j) {
        EXPECT_NEAR(a(j, 0), ref_a[j], 1e-6);
        EXPECT_NEAR(b(j, 0), ref_b[j], 1e-6);
    }
}

TEST(Fit, MatchesCoordinateDescentOracle) {
    Rng rng(7);
    SolverSettings s;
    s.tol = 1e-14;
    s.max_iters = 100000;
    for (int rep = 0; rep < 10; ++rep) {
        const auto m = random_moments(5, 1, 50, rng);
        const double mu = 0.05 * (rep + 1);
        const auto w = fit(m, {mu, 0.0, 0.0}, build_incidence(chain_graph(1)), s).model.coefficients;
        const auto oracle = test::lasso_cd(m[0].gamma_mat, m[0].gamma_vec, mu / 2);
        EXPECT_LT((w.col(0) - oracle).cwiseAbs().maxCoeff(), 1e-4);
    }
}

TEST(Fit, ObjectiveTraceNonIncreasing) {
    Rng rng(12);
    const auto m = random_moments(8, 4, 30, rng);
    const auto rep = fit(m, {0.05, 0.3, 0.0}, build_incidence(chain_graph(4)));
    ASSERT_GE(rep.objective_trace.size(), 2u);
    EXPECT_EQ(rep.objective_trace.front(), 0.0);
    for (std::size_t i = 1; i < rep.objective_trace.size(); ++i) {
        EXPECT_LE(rep.objective_trace[i], rep.objective_trace[i - 1]);
    }
}

TEST(Fit, IdenticalMomentsGiveIdenticalModels) {
    Rng rng(19);
    std::vector<MomentPair> a;
    std::vector<MomentPair> b;
    for (int t = 0; t < 3; ++t) {
        const Eigen::MatrixXd x = test::gaussian(40, 6, rng);
        const Eigen::VectorXd y = test::gaussian(40, 1, rng);
        a.push_back(empirical_moments(x, y));
        b.push_back(plugin_moments_rlgr1(complete_task(x, y), 0.0));
    }
    const auto r = build_incidence(chain_graph(3));
    const auto wa = fit(a, {0.01, 0.1, 0.0}, r).model.coefficients;
    const auto wb = fit(b, {0.01, 0.1, 0.0}, r).model.coefficients;
    EXPECT_EQ((wa - wb).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Fit, RejectsMismatchedInputs) {
    Rng rng(2);
    const auto m = random_moments(3, 2, 10, rng);
    EXPECT_THROW(fit(m, {0.1, 0.1, 0}, build_incidence(chain_graph(3))), Error);
    EXPECT_THROW(fit(m, {-0.1, 0.1, 0}, build_incidence(chain_graph(2))), Error);
}

TEST(Fit, UnboundedObjectiveIsNumericalFailure) {
    const std::vector<MomentPair> m{make_moments(Eigen::MatrixXd::Constant(1, 1, -1.0), Eigen::VectorXd::Ones(1),
                                                 MomentKind::rlgr)};
    try {
        fit(m, {0.0, 0.0, 0.0}, build_incidence(chain_graph(1)), {1000000, 1e-12, 1.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::numerical_failure);
    }
}

TEST(Predict, Examples) {
    Eigen::MatrixXd x(1, 2);
    x << 1, 2;
    EXPECT_DOUBLE_EQ(predict(x, Eigen::Vector2d(3, -1))(0), 1.0);
    EXPECT_TRUE(predict(x, Eigen::Vector2d::Zero()).isZero(0.0));
    EXPECT_EQ(predict(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(4, 5)), Eigen::Vector2d(4, 5));
}
