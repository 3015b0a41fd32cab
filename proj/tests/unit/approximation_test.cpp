#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "mvrkhs/approximation.hpp"
#include "mvrkhs/error.hpp"
#include "mvrkhs/random.hpp"

using namespace mvrkhs;

namespace {

CenterSet columns(const Eigen::MatrixXd& pts) { return CenterSet{pts}; }

Eigen::MatrixXd random_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = rng.uniform(-scale, scale);
  return a;
}

Eigen::MatrixXd spd_weight(CounterRng& rng, int m) {
  const Eigen::MatrixXd a = random_matrix(rng, m, m);
  return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(m, m);
}

CenterSet fps_circle(int count, int n = 2) {
  const auto circle = Manifold::circle(1.0, n);
  return farthest_point_sample(circle, count, dense_candidates(circle, dense_candidate_count(circle, count)));
}

// Dense oracle: the full Grammian assembled entry by entry through eval_operator.
Eigen::MatrixXd dense_grammian(const OperatorKernel& k, const Eigen::MatrixXd& c) {
  const Eigen::Index m = k.output_dim(), N = c.cols();
  Eigen::MatrixXd g(m * N, m * N);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j) g.block(i * m, j * m, m, m) = eval_operator(k, c.col(i), c.col(j));
  return g;
}

Eigen::MatrixXd dense_sections(const OperatorKernel& k, const Eigen::MatrixXd& c, const Point& x) {
  const Eigen::Index m = k.output_dim();
  Eigen::MatrixXd s(m, m * c.cols());
  for (Eigen::Index i = 0; i < c.cols(); ++i) s.middleCols(i * m, m) = eval_operator(k, x, c.col(i));
  return s;
}

}  // namespace

TEST(Subspace, SingleCenterIdentityWeight) {
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(1.5, 0.5), 3);
  const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(2, 1, 0.4);
  const Subspace sub = build_subspace(k, columns(c));
  EXPECT_EQ(sub.grammian(), Eigen::MatrixXd::Identity(3, 3));
  EXPECT_EQ(sub.jitter(), 0.0);
}

TEST(Subspace, NearlyCoincidentCentersRejected) {
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(2.5, 1.0), 1);
  Eigen::MatrixXd c(2, 2);
  c << 0.1, 0.1 + 1e-14, 0.2, 0.2;
  try {
    build_subspace(k, columns(c));
    FAIL() << "expected IllConditioned";
  } catch (const IllConditioned& e) {
    EXPECT_LT(e.min_separation(), 1e-13);
  }
}

TEST(Subspace, CircleGrammianPositiveDefinite) {
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(1.5, 0.5), 1);
  const Subspace sub = build_subspace(k, fps_circle(10));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense_grammian(k, sub.centers().points));
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  EXPECT_EQ(sub.jitter(), 0.0);
  EXPECT_LT((sub.grammian() - dense_grammian(k, sub.centers().points)).norm(), 1e-15);
}

TEST(Subspace, FactorReproducesJitteredGrammian) {
  CounterRng rng(3, 1);
  const OperatorKernel k(ScalarKernel::wendland(1.2), spd_weight(rng, 2));
  const Subspace sub = build_subspace(k, fps_circle(24, 3));
  const Eigen::MatrixXd L = sub.factor();
  Eigen::MatrixXd target = sub.grammian();
  target.diagonal().array() += sub.jitter();
  EXPECT_LT((L * L.transpose() - target).norm(), 1e-8 * target.norm());
  EXPECT_TRUE(sub.grammian().isApprox(sub.grammian().transpose(), 0.0));
}

TEST(Project, TwoByTwoHandSolve) {
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(0.5, 1.0), 1);
  Eigen::MatrixXd c(1, 2);
  c << 0.0, 1.0;
  const double a = std::exp(-1.0);
  Eigen::MatrixXd f(1, 2);
  f << 1.0, 0.0;
  const KernelFunction fn = project(build_subspace(k, columns(c)), f);
  EXPECT_NEAR(fn.coeffs()[0], 1.0 / (1 - a * a), 1e-14);
  EXPECT_NEAR(fn.coeffs()[1], -a / (1 - a * a), 1e-14);
}

TEST(Project, ZeroSamplesGiveZeroCoefficients) {
  const auto k = OperatorKernel::diagonal(ScalarKernel::gaussian(0.4), 2);
  const KernelFunction fn = project(build_subspace(k, fps_circle(6)), Eigen::MatrixXd::Zero(2, 6));
  EXPECT_EQ(fn.coeffs(), Eigen::VectorXd::Zero(12));
  EXPECT_EQ(eval_function(fn, Point::Constant(2, 0.3)), Eigen::VectorXd::Zero(2));
}

TEST(Project, RejectsWrongSampleCount) {
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(1.5, 0.5), 2);
  const Subspace sub = build_subspace(k, fps_circle(5));
  EXPECT_THROW(project(sub, Eigen::MatrixXd::Zero(2, 4)), DimensionMismatch);
  EXPECT_THROW(project(sub, Eigen::MatrixXd::Zero(3, 5)), DimensionMismatch);
}

TEST(Project, InterpolatesAndIsIdempotent) {
  CounterRng rng(11, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + trial % 3;
    const int N = 4 + trial;
    const OperatorKernel k(ScalarKernel::matern(trial % 2 ? 2.5 : 1.5, 0.4), spd_weight(rng, m));
    const Subspace sub = build_subspace(k, fps_circle(N, 3));
    const Eigen::MatrixXd samples = random_matrix(rng, m, N);
    const KernelFunction fn = project(sub, samples);
    const Eigen::MatrixXd at_centers = fn.evaluate(sub.centers().points);
    EXPECT_LE((at_centers - samples).cwiseAbs().maxCoeff(), 1e-6 * (1 + samples.cwiseAbs().maxCoeff()));
    const KernelFunction again = project(sub, at_centers);
    EXPECT_LE((again.coeffs() - fn.coeffs()).norm(), 1e-8 * fn.coeffs().norm());
  }
}

TEST(EvalFunction, MatchesDirectSum) {
  CounterRng rng(5, 3);
  const OperatorKernel k(ScalarKernel::wendland(0.9), spd_weight(rng, 2));
  const Eigen::MatrixXd c = random_matrix(rng, 3, 7);
  const Eigen::VectorXd theta = random_matrix(rng, 14, 1);
  const KernelFunction fn(k, c, theta);
  for (int t = 0; t < 5; ++t) {
    const Point x = random_matrix(rng, 3, 1);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
    for (int i = 0; i < 7; ++i) sum += eval_operator(k, x, c.col(i)) * theta.segment(2 * i, 2);
    EXPECT_LT((eval_function(fn, x) - sum).norm(), 1e-14);
  }
  EXPECT_THROW(eval_function(fn, Point::Zero(2)), DimensionMismatch);
}

TEST(EvalFunction, SingleCenterReturnsCoefficient) {
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(0.5, 1.0), 2);
  Eigen::VectorXd theta(2);
  theta << 0.7, -1.3;
  const KernelFunction fn(k, Eigen::MatrixXd::Constant(2, 1, 0.5), theta);
  EXPECT_EQ(eval_function(fn, Point::Constant(2, 0.5)), theta);
}

TEST(SubspaceKernel, Identities) {
  CounterRng rng(7, 4);
  const auto k1 = OperatorKernel::diagonal(ScalarKernel::matern(1.5, 0.6), 1);
  const Eigen::MatrixXd c1 = Eigen::MatrixXd::Constant(2, 1, 0.2);
  const Subspace one = build_subspace(k1, columns(c1));
  const Point x1 = random_matrix(rng, 2, 1), x2 = random_matrix(rng, 2, 1);
  EXPECT_NEAR(subspace_kernel(one, x1, x2)(0, 0),
              eval_scalar(k1.scalar(), x1, c1.col(0)) * eval_scalar(k1.scalar(), c1.col(0), x2), 1e-15);

  const OperatorKernel k(ScalarKernel::matern(2.5, 0.8), spd_weight(rng, 2));
  const Subspace sub = build_subspace(k, fps_circle(5));
  const Eigen::MatrixXd c = sub.centers().points;
  const Eigen::MatrixXd oracle = dense_sections(k, c, x1) *
                                 dense_grammian(k, c).ldlt().solve(dense_sections(k, c, x2).transpose());
  EXPECT_LT((subspace_kernel(sub, x1, x2) - oracle).norm(), 1e-10);
  EXPECT_LT((subspace_kernel(sub, x1, x2) - subspace_kernel(sub, x2, x1).transpose()).norm(), 1e-12);
  EXPECT_LT((subspace_kernel(sub, c.col(2), c.col(2)) - k.weight()).norm(), 1e-10);
}

TEST(Power, ZeroAtCentersAndEmptyConvention) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, 2);
  B.diagonal() << 4.0, 1.0;
  const OperatorKernel k(ScalarKernel::matern(1.5, 0.5), B);
  const Subspace none = Subspace::empty(k, 2);
  const Point x = Point::Constant(2, 0.1);
  EXPECT_NEAR(power2(none, x), 2.0, 1e-15);
  EXPECT_NEAR(power_inf(none, x), 2.0, 1e-15);
  EXPECT_NEAR(power2(none, x), diagonal_bound(k), 1e-15);
  EXPECT_EQ(project(none, Eigen::MatrixXd::Zero(2, 0)).coeffs().size(), 0);

  const Subspace sub = build_subspace(k, fps_circle(12));
  for (Eigen::Index i = 0; i < sub.size(); ++i) {
    const double tol = std::sqrt(sub.jitter()) * B.norm() + 1e-6;
    EXPECT_LE(power2(sub, sub.centers().points.col(i)), tol);
    EXPECT_LE(power_inf(sub, sub.centers().points.col(i)), tol);
    EXPECT_LE(pointwise_error_bound(sub, 3.0, sub.centers().points.col(i)), 3 * tol);
  }
  EXPECT_EQ(pointwise_error_bound(sub, 0.0, x), 0.0);
}

TEST(Power, RankOneIdentity) {
  const auto k = OperatorKernel::diagonal(ScalarKernel::gaussian(0.7), 1);
  const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(2, 1, -0.3);
  const Subspace sub = build_subspace(k, columns(c));
  CounterRng rng(1, 5);
  for (int t = 0; t < 10; ++t) {
    const Point x = random_matrix(rng, 2, 1);
    const double kv = eval_scalar(k.scalar(), x, c.col(0));
    EXPECT_NEAR(power2(sub, x) * power2(sub, x), 1 - kv * kv, 1e-13);
    EXPECT_EQ(power2(sub, x), power_inf(sub, x));
  }
}

TEST(Power, DeficitPsdAndNormEquivalence) {
  CounterRng rng(13, 6);
  const OperatorKernel k(ScalarKernel::matern(2.5, 0.5), spd_weight(rng, 3));
  const Subspace sub = build_subspace(k, fps_circle(20, 3));
  const double root_m = std::sqrt(3.0);
  for (int t = 0; t < 500; ++t) {
    const Point x = random_matrix(rng, 3, 1, 1.5);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(power_deficit(sub, x));
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-8);
    const double p2 = power2(sub, x), pi = power_inf(sub, x);
    EXPECT_LE(pi, p2 * root_m + 1e-12);
    EXPECT_LE(p2, pi * root_m + 1e-12);
  }
}

TEST(Power, NestedMonotonicity) {
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(1.5, 0.5), 2);
  const CenterSet big = fps_circle(24);
  const Subspace coarse = build_subspace(k, big.prefix(8));
  const Subspace fine = build_subspace(k, big);
  const auto circle = Manifold::circle(1.0);
  const Eigen::MatrixXd cloud = dense_candidates(circle, 2000);
  const PowerSweep a = power_sweep(coarse, cloud), b = power_sweep(fine, cloud);
  EXPECT_LE((b.p2 - a.p2).maxCoeff(), 1e-8);
  EXPECT_LT(sup_power(fine, cloud, PowerKind::kP2), sup_power(coarse, cloud, PowerKind::kP2));
}

TEST(Power, SweepMatchesPointwise) {
  CounterRng rng(17, 7);
  const OperatorKernel k(ScalarKernel::wendland(1.0), spd_weight(rng, 2));
  const Subspace sub = build_subspace(k, fps_circle(9, 3));
  const Eigen::MatrixXd cloud = random_matrix(rng, 3, 30);
  const PowerSweep s = power_sweep(sub, cloud);
  for (Eigen::Index i = 0; i < cloud.cols(); ++i) {
    EXPECT_NEAR(s.p2[i], power2(sub, cloud.col(i)), 1e-10);
    EXPECT_NEAR(s.pinf[i], power_inf(sub, cloud.col(i)), 1e-10);
  }
  EXPECT_NEAR(sup_power(sub, cloud.col(4), PowerKind::kPInf), s.pinf[4], 1e-15);
  EXPECT_LE(sup_power(sub, sub.centers().points, PowerKind::kP2), 1e-6);
  EXPECT_THROW(sup_power(sub, Eigen::MatrixXd(3, 0), PowerKind::kP2), InvalidArgument);
}

TEST(Power, PointwiseBoundCoversOrthogonalTail) {
  CounterRng rng(19, 8);
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(2.5, 0.6), 2);
  const CenterSet all = fps_circle(9);
  const Subspace sub = build_subspace(k, all.prefix(8));
  // f = span part over Ξ_N plus one section at the extra center ζ
  const KernelFunction f(k, all.points, random_matrix(rng, 18, 1));
  const KernelFunction pf = project_function(sub, f);
  const double norm = rkhs_norm(f);
  // reproduction: Π_N f interpolates f
  EXPECT_LE((pf.evaluate(sub.centers().points) - f.evaluate(sub.centers().points)).cwiseAbs().maxCoeff(), 1e-6);
  const Eigen::MatrixXd cloud = dense_candidates(Manifold::circle(1.0), 500);
  for (Eigen::Index i = 0; i < cloud.cols(); ++i) {
    const double err = (eval_function(f, cloud.col(i)) - eval_function(pf, cloud.col(i))).norm();
    EXPECT_LE(err, pointwise_error_bound(sub, norm, cloud.col(i)) + 1e-10);
  }
}

TEST(RkhsNorm, Examples) {
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(1.5, 0.5), 1);
  EXPECT_DOUBLE_EQ(rkhs_norm(KernelFunction(k, Eigen::MatrixXd::Zero(2, 1), Eigen::VectorXd::Constant(1, 2.0))), 2.0);
  EXPECT_EQ(rkhs_norm(KernelFunction(k, Eigen::MatrixXd::Zero(2, 3), Eigen::VectorXd::Zero(3))), 0.0);

  CounterRng rng(23, 9);
  const OperatorKernel kb(ScalarKernel::matern(2.5, 0.7), spd_weight(rng, 2));
  const Eigen::MatrixXd c = random_matrix(rng, 2, 6);
  const Eigen::VectorXd theta = random_matrix(rng, 12, 1);
  const KernelFunction f(kb, c, theta);
  EXPECT_NEAR(rkhs_norm(f), std::sqrt(theta.dot(dense_grammian(kb, c) * theta)), 1e-12);
  EXPECT_NEAR(rkhs_inner(f, f), rkhs_norm(f) * rkhs_norm(f), 1e-12);
  const KernelFunction other(OperatorKernel::diagonal(ScalarKernel::matern(1.5, 0.7), 2), c, theta);
  EXPECT_THROW(rkhs_inner(f, other), InvalidArgument);
}

TEST(Restriction, GrammianIdentityAndOffManifold) {
  const auto circle = Manifold::circle(1.0, 3);
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(2.5, 0.5), 2);
  const RestrictedKernel r(k, circle);
  const Eigen::MatrixXd c = fps_circle(7, 3).points;
  EXPECT_EQ(r.grammian(c), dense_grammian(k, c));
  Point off = c.col(0);
  off[2] = 1e-3;
  EXPECT_THROW(r(off, c.col(1)), InvalidArgument);
}

TEST(Restriction, ZeroFunctionHasNoDeviation) {
  const auto circle = Manifold::circle(1.0, 3);
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(1.5, 0.5), 1);
  const CenterSet c = fps_circle(5, 3);
  const ExtensionReport rep =
      restrict_then_extend_check(k, circle, KernelFunction(k, c.points, Eigen::VectorXd::Zero(5)), c.prefix(3),
                                 circle.quadrature(64));
  EXPECT_EQ(rep.max_deviation(), 0.0);
}

TEST(Restriction, LissajousProjectionCommutes) {
  const auto curve = Manifold::lissajous(3);
  CounterRng rng(29, 10);
  const OperatorKernel k(ScalarKernel::matern(2.5, 0.6), spd_weight(rng, 2));
  const Eigen::MatrixXd cand = dense_candidates(curve, 600);
  const CenterSet all = farthest_point_sample(curve, 12, cand);
  const KernelFunction f(k, all.points, random_matrix(rng, 24, 1));
  const ExtensionReport rep = restrict_then_extend_check(k, curve, f, all.prefix(6), curve.quadrature(200));
  EXPECT_EQ(rep.isometry, 0.0);
  EXPECT_EQ(rep.grammian_identity, 0.0);
  EXPECT_LE(rep.restriction_extension, 1e-12);
  EXPECT_LE(rep.projection_commute, 1e-8);
}

TEST(IntegralOperator, ZeroAndBound) {
  const auto circle = Manifold::circle(2.0);
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(1.5, 0.5), 1);
  const Quadrature q = circle.quadrature(128);
  const KernelFunction zero = apply_integral_operator(k, circle, q, Eigen::MatrixXd::Zero(1, 128));
  EXPECT_EQ(eval_function(zero, q.points.col(3)).norm(), 0.0);
  const KernelFunction ones = apply_integral_operator(k, circle, q, Eigen::MatrixXd::Ones(1, 128));
  const Eigen::MatrixXd vals = ones.evaluate(q.points);
  EXPECT_GT(vals.minCoeff(), 0.0);
  EXPECT_LE(vals.maxCoeff(), diagonal_bound(k) * diagonal_bound(k) * circle.measure());
  EXPECT_THROW(apply_integral_operator(k, circle, q, Eigen::MatrixXd::Ones(1, 127)), DimensionMismatch);
}

TEST(IntegralOperator, BumpConvergesUnderRefinement) {
  const auto circle = Manifold::circle(1.0, 3);
  const auto k = OperatorKernel::diagonal(ScalarKernel::matern(2.5, 0.5), 2);
  Bump bump;
  bump.center = Eigen::VectorXd::Constant(1, 0.3);
  bump.width = 0.1;
  const KernelFunction coarse = make_bump_target(k, circle, bump, 100);
  const KernelFunction fine = make_bump_target(k, circle, bump, 400);
  const KernelFunction finest = make_bump_target(k, circle, bump, 1600);
  const Eigen::MatrixXd probe = dense_candidates(circle, 97);
  const Eigen::MatrixXd ref = finest.evaluate(probe);
  const double scale = ref.cwiseAbs().maxCoeff();
  EXPECT_LE((fine.evaluate(probe) - ref).cwiseAbs().maxCoeff(), 0.01 * scale);
  EXPECT_LE((coarse.evaluate(probe) - ref).cwiseAbs().maxCoeff(), 0.01 * scale);
}

TEST(KernelFunctionCsv, RoundTrip) {
  CounterRng rng(31, 11);
  const OperatorKernel k(ScalarKernel::wendland(0.8), spd_weight(rng, 2));
  const KernelFunction f(k, random_matrix(rng, 3, 4), random_matrix(rng, 8, 1));
  std::stringstream ss;
  write_kernel_function_csv(ss, f);
  const KernelFunction g = read_kernel_function_csv(ss);
  EXPECT_EQ(g.centers(), f.centers());
  EXPECT_EQ(g.coeffs(), f.coeffs());
  EXPECT_EQ(g.kernel().weight(), f.kernel().weight());
  EXPECT_EQ(g.kernel().scalar().family(), KernelFamily::kWendland);
}
