#include "chainfolio/error.hpp"
#include "chainfolio/qp.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

namespace cf = chainfolio;
namespace qp = chainfolio::qp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

qp::Problem simplex_problem(const MatrixXd& G, const VectorXd& g) {
  const auto n = G.rows();
  qp::Problem p;
  p.G = G;
  p.g = g;
  p.A_eq = MatrixXd::Ones(1, n);
  p.b_eq = VectorXd::Ones(1);
  p.A_in = MatrixXd::Identity(n, n);
  p.b_in = VectorXd::Zero(n);
  return p;
}

}  // namespace

TEST(Qp, UnconstrainedMinimiser) {
  qp::Problem p;
  p.G = MatrixXd::Identity(2, 2) * 2.0;
  p.g = VectorXd(2);
  p.g << -2.0, 4.0;
  p.A_eq.resize(0, 2);
  p.A_in.resize(0, 2);
  const auto r = qp::solve(p);
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r.x(0), 1.0, 1e-14);
  EXPECT_NEAR(r.x(1), -2.0, 1e-14);
  EXPECT_NEAR(r.objective, -5.0, 1e-14);
}

TEST(Qp, EqualityAndActiveBound) {
  auto p = simplex_problem(MatrixXd::Identity(2, 2), VectorXd::Zero(2));
  auto r = qp::solve(p);
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r.x(0), 0.5, 1e-14);
  EXPECT_NEAR(r.x(1), 0.5, 1e-14);

  p.A_in.conservativeResize(3, 2);
  p.A_in.row(2) << 1.0, 0.0;
  p.b_in.conservativeResize(3);
  p.b_in(2) = 0.8;
  r = qp::solve(p);
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r.x(0), 0.8, 1e-14);
  EXPECT_NEAR(r.x(1), 0.2, 1e-14);
  EXPECT_EQ(r.active_inequalities, std::vector<int>{2});
  EXPECT_LT(qp::max_violation(p, r.x), 1e-14);
}

TEST(Qp, ReportsInfeasibleAndDependentConstraints) {
  qp::Problem p;
  p.G = MatrixXd::Identity(1, 1);
  p.g = VectorXd::Zero(1);
  p.A_eq.resize(0, 1);
  p.A_in = MatrixXd(2, 1);
  p.A_in << 1.0, -1.0;
  p.b_in = VectorXd(2);
  p.b_in << 1.0, 0.0;
  EXPECT_EQ(qp::solve(p).status, qp::Status::Infeasible);

  qp::Problem q;
  q.G = MatrixXd::Identity(2, 2);
  q.g = VectorXd::Zero(2);
  q.A_eq = MatrixXd(2, 2);
  q.A_eq << 1.0, 1.0, 2.0, 2.0;
  q.b_eq = VectorXd(2);
  q.b_eq << 1.0, 3.0;
  q.A_in.resize(0, 2);
  const auto r = qp::solve(q);
  EXPECT_FALSE(r.ok());
}

TEST(Qp, RejectsIndefiniteHessian) {
  MatrixXd G(2, 2);
  G << 1.0, 0.0, 0.0, -1.0;
  EXPECT_THROW(qp::solve(simplex_problem(G, VectorXd::Zero(2))), cf::NumericalError);
}

TEST(Qp, SimplexSolutionsSatisfyOptimalityConditions) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + rep % 6;
    const MatrixXd G = cf::testing::random_covariance(rng, n) * 1e3;
    VectorXd g(n);
    for (int i = 0; i < n; ++i) g(i) = z(rng);
    const auto p = simplex_problem(G, g);
    const auto r = qp::solve(p);
    ASSERT_TRUE(r.ok());
    EXPECT_LT(qp::max_violation(p, r.x), 1e-10);
    // Gradient is equal on the support and no smaller off it.
    const VectorXd grad = G * r.x + g;
    double level = 0.0;
    for (int i = 0; i < n; ++i) {
      if (r.x(i) > 1e-9) {
        level = grad(i);
        break;
      }
    }
    for (int i = 0; i < n; ++i) {
      if (r.x(i) > 1e-9) {
        EXPECT_NEAR(grad(i), level, 1e-8);
      } else {
        EXPECT_GE(grad(i), level - 1e-8);
      }
    }
  }
}
