#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "mvrkhs/error.hpp"
#include "mvrkhs/kernel.hpp"
#include "mvrkhs/random.hpp"

using namespace mvrkhs;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

std::vector<ScalarKernel> catalog(double rho = 0.7) {
  return {ScalarKernel::matern(0.5, rho), ScalarKernel::matern(1.5, rho), ScalarKernel::matern(2.5, rho),
          ScalarKernel::wendland(rho), ScalarKernel::gaussian(rho)};
}

Point random_point(CounterRng& rng, int n, double scale = 1.0) {
  Point p(n);
  for (int i = 0; i < n; ++i) p[i] = rng.uniform(-scale, scale);
  return p;
}

}  // namespace

TEST(ScalarKernel, MaternHalfClosedForm) {
  const auto k = ScalarKernel::matern(0.5, 1.0);
  EXPECT_DOUBLE_EQ(eval_scalar(k, pt({0.3, -1.0}), pt({0.3, -1.0})), 1.0);
  EXPECT_NEAR(eval_scalar(k, pt({0.0, 0.0}), pt({1.0, 0.0})), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(eval_scalar(k, pt({0.0}), pt({1.0})), 0.367879, 1e-6);
}

TEST(ScalarKernel, MaternHigherOrdersAgainstFormula) {
  const double r = 0.8;
  const double rho = 0.5;
  const double a = std::sqrt(3.0) * r / rho;
  const double b = std::sqrt(5.0) * r / rho;
  EXPECT_NEAR(eval_scalar(ScalarKernel::matern(1.5, rho), pt({0.0}), pt({r})), (1 + a) * std::exp(-a), 1e-15);
  EXPECT_NEAR(eval_scalar(ScalarKernel::matern(2.5, rho), pt({0.0}), pt({r})),
              (1 + b + b * b / 3.0) * std::exp(-b), 1e-15);
}

TEST(ScalarKernel, WendlandSupportBoundary) {
  const auto k = ScalarKernel::wendland(1.0);
  EXPECT_EQ(eval_scalar(k, pt({0.0}), pt({1.0})), 0.0);
  EXPECT_EQ(eval_scalar(k, pt({0.0}), pt({2.5})), 0.0);
  const double r = 0.25;
  EXPECT_NEAR(eval_scalar(k, pt({0.0}), pt({r})), std::pow(1 - r, 4) * (4 * r + 1), 1e-15);
}

TEST(ScalarKernel, GaussianHasNoDecayOrder) {
  EXPECT_FALSE(ScalarKernel::gaussian(1.0).decay_order(3).has_value());
  EXPECT_DOUBLE_EQ(*ScalarKernel::matern(2.5, 1.0).decay_order(3), 4.0);
  EXPECT_DOUBLE_EQ(*ScalarKernel::matern(0.5, 1.0).decay_order(1), 1.0);
  EXPECT_DOUBLE_EQ(*ScalarKernel::wendland(1.0).decay_order(3), 3.0);
}

TEST(ScalarKernel, AmbientDimensionChecks) {
  EXPECT_THROW(ScalarKernel::wendland(1.0).check_ambient_dim(4), InvalidArgument);
  EXPECT_NO_THROW(ScalarKernel::matern(0.5, 1.0).check_ambient_dim(10));
  EXPECT_NO_THROW(ScalarKernel::gaussian(1.0).check_ambient_dim(50));
}

TEST(ScalarKernel, RejectsBadParameters) {
  EXPECT_THROW(ScalarKernel::matern(1.0, 1.0), InvalidArgument);
  EXPECT_THROW(ScalarKernel::matern(0.5, 0.0), InvalidArgument);
  EXPECT_THROW(ScalarKernel::gaussian(-1.0), InvalidArgument);
  EXPECT_THROW(ScalarKernel(KernelFamily::kWendland, 2.0, 1.0), InvalidArgument);
  EXPECT_THROW(parse_kernel_family("laplace"), InvalidArgument);
  EXPECT_EQ(parse_kernel_family(to_string(KernelFamily::kWendland)), KernelFamily::kWendland);
}

TEST(ScalarKernel, EvalRejectsMismatchAndNonFinite) {
  const auto k = ScalarKernel::matern(1.5, 1.0);
  EXPECT_THROW(eval_scalar(k, pt({0.0, 1.0}), pt({0.0})), DimensionMismatch);
  EXPECT_THROW(eval_scalar(k, pt({NAN}), pt({0.0})), InvalidArgument);
  EXPECT_THROW(eval_scalar(k, pt({INFINITY}), pt({0.0})), InvalidArgument);
}

TEST(ScalarKernel, SymmetricAndBoundedOnSampledPairs) {
  CounterRng rng(1, 0);
  for (const auto& k : catalog()) {
    for (int trial = 0; trial < 200; ++trial) {
      const Point a = random_point(rng, 3);
      const Point b = random_point(rng, 3);
      const double kab = eval_scalar(k, a, b);
      EXPECT_EQ(kab, eval_scalar(k, b, a));
      EXPECT_LE(kab, 1.0);
      if (k.family() == KernelFamily::kWendland) {
        EXPECT_GE(kab, 0.0);
      } else {
        EXPECT_GT(kab, 0.0);
        EXPECT_LT(kab, 1.0);
      }
      EXPECT_EQ(eval_scalar(k, a, a), 1.0);
    }
  }
}

TEST(OperatorKernel, DiagonalCase) {
  const auto K = OperatorKernel::diagonal(ScalarKernel::matern(1.5, 1.0), 2);
  const Point x = pt({0.1, 0.2, 0.3});
  EXPECT_TRUE(eval_operator(K, x, x).isApprox(Eigen::Matrix2d::Identity()));
  const Eigen::MatrixXd off = eval_operator(K, x, pt({1.0, -1.0, 0.0}));
  EXPECT_EQ(off(0, 1), 0.0);
  EXPECT_EQ(off(1, 0), 0.0);
  EXPECT_TRUE(K.is_diagonal());
}

TEST(OperatorKernel, SeparableWeight) {
  Eigen::Matrix2d B;
  B << 2, 1, 1, 2;
  const OperatorKernel K(ScalarKernel::gaussian(0.5), B);
  const Point x = pt({0.3, 0.4});
  EXPECT_TRUE(eval_operator(K, x, x).isApprox(B));
  CounterRng rng(2, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const Point a = random_point(rng, 2);
    const Point b = random_point(rng, 2);
    const Eigen::MatrixXd kab = eval_operator(K, a, b);
    const double s = eval_scalar(K.scalar(), a, b);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) EXPECT_EQ(kab(i, j), B(i, j) * s);
    }
    EXPECT_TRUE(kab.isApprox(eval_operator(K, b, a).transpose()));
  }
}

TEST(OperatorKernel, RejectsNonPsdOrAsymmetricWeight) {
  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;  // eigenvalue −1
  EXPECT_THROW(OperatorKernel(ScalarKernel::matern(0.5, 1.0), bad), InvalidArgument);
  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(OperatorKernel(ScalarKernel::matern(0.5, 1.0), asym), InvalidArgument);
  EXPECT_THROW(OperatorKernel(ScalarKernel::matern(0.5, 1.0), Eigen::MatrixXd(2, 3)), DimensionMismatch);
}

TEST(OperatorKernel, DiagonalBound) {
  const auto k = ScalarKernel::matern(2.5, 1.0);
  EXPECT_DOUBLE_EQ(diagonal_bound(OperatorKernel::diagonal(k, 3)), 1.0);
  EXPECT_NEAR(diagonal_bound(OperatorKernel(k, Eigen::Vector2d(4, 1).asDiagonal())), 2.0, 1e-14);
  Eigen::Matrix2d B;
  B << 2, 1, 1, 2;
  // eigenvalues 1 and 3
  const double oracle = std::sqrt(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(B).eigenvalues().maxCoeff());
  EXPECT_NEAR(diagonal_bound(OperatorKernel(k, B)), oracle, 1e-14);
  EXPECT_NEAR(oracle, std::sqrt(3.0), 1e-14);
}

TEST(PsdCheck, Examples) {
  const auto K = OperatorKernel::diagonal(ScalarKernel::matern(1.5, 1.0), 2);
  Eigen::MatrixXd c(2, 1);
  c << 0.5, 0.5;
  Eigen::MatrixXd y(2, 1);
  y << 1, 0;
  EXPECT_DOUBLE_EQ(psd_check(K, c, y, Eigen::VectorXd::Ones(1)), 1.0);

  CounterRng rng(3, 0);
  Eigen::MatrixXd centers(2, 5), dirs(2, 5);
  for (int i = 0; i < 5; ++i) {
    const double t = 2 * M_PI * rng.uniform();
    centers.col(i) << std::cos(t), std::sin(t);
    dirs.col(i) << rng.normal(), rng.normal();
  }
  EXPECT_EQ(psd_check(K, centers, dirs, Eigen::VectorXd::Zero(5)), 0.0);
  Eigen::VectorXd alpha(5);
  for (int i = 0; i < 5; ++i) alpha[i] = rng.normal();
  // oracle: Grammian min eigenvalue ≥ 0 and the same quadratic form by hand
  Eigen::MatrixXd G(10, 10);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) G.block(2 * i, 2 * j, 2, 2) = eval_operator(K, centers.col(i), centers.col(j));
  }
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().minCoeff(), 0.0);
  Eigen::VectorXd v(10);
  for (int i = 0; i < 5; ++i) v.segment(2 * i, 2) = alpha[i] * dirs.col(i);
  const double value = psd_check(K, centers, dirs, alpha);
  EXPECT_GE(value, 0.0);
  EXPECT_NEAR(value, v.dot(G * v), 1e-12);
}

TEST(PsdCheck, Errors) {
  const auto K = OperatorKernel::diagonal(ScalarKernel::matern(1.5, 1.0), 1);
  EXPECT_THROW(psd_check(K, Eigen::MatrixXd(2, 0), Eigen::MatrixXd(1, 0), Eigen::VectorXd(0)), InvalidArgument);
  EXPECT_THROW(psd_check(K, Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(1, 3), Eigen::VectorXd::Zero(2)),
               DimensionMismatch);
  EXPECT_THROW(psd_check(K, Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2)),
               DimensionMismatch);
}

TEST(PsdCheck, RandomDrawsStayNonnegative) {
  CounterRng rng(4, 0);
  Eigen::Matrix2d B;
  B << 2, 1, 1, 2;
  for (const auto& k : catalog(0.5)) {
    const OperatorKernel K(k, B);
    for (int trial = 0; trial < 200; ++trial) {
      const int N = 1 + static_cast<int>(rng.uniform() * 12);
      Eigen::MatrixXd c(3, N), y(2, N);
      Eigen::VectorXd a(N);
      for (int i = 0; i < N; ++i) {
        c.col(i) = random_point(rng, 3);
        y.col(i) << rng.normal(), rng.normal();
        a[i] = rng.normal();
      }
      EXPECT_GE(psd_check(K, c, y, a), -1e-10);
    }
  }
}
