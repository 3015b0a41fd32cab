#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "mvrkhs/complexity.hpp"
#include "mvrkhs/error.hpp"

using namespace mvrkhs;

TEST(ReducedSmoothness, Examples) {
  const auto a = reduced_smoothness(3.0, 3, 1);
  EXPECT_DOUBLE_EQ(a.value, 2.0);
  EXPECT_TRUE(a.embeds_continuously);
  EXPECT_TRUE(a.warnings.empty());
  EXPECT_DOUBLE_EQ(reduced_smoothness(2.7, 2, 2).value, 2.7);

  const auto b = reduced_smoothness(2.0, 5, 1);
  EXPECT_DOUBLE_EQ(b.value, 0.0);
  EXPECT_FALSE(b.embeds_continuously);
  EXPECT_FALSE(b.warnings.empty());
}

TEST(ReducedSmoothness, RejectsBadDimensions) {
  EXPECT_THROW(reduced_smoothness(3.0, 3, 0), InvalidArgument);
  EXPECT_THROW(reduced_smoothness(3.0, 3, 4), InvalidArgument);
  EXPECT_THROW(reduced_smoothness(0.0, 3, 1), InvalidArgument);
}

TEST(Predictors, ExponentArithmetic) {
  const Calibration cal{0.2, 40.0};
  EXPECT_DOUBLE_EQ(predict_center_count(0.2, 1, 2.0, cal), 40.0);
  EXPECT_NEAR(predict_center_count(0.05, 1, 2.0) / predict_center_count(0.1, 1, 2.0), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(predict_center_count(0.01, 2, 1.0) / predict_center_count(0.1, 2, 1.0), 100.0, 1e-9);

  EXPECT_DOUBLE_EQ(predict_cube_center_count(0.2, 3, 2.0, cal), 40.0);
  EXPECT_NEAR(predict_cube_center_count(0.01, 3, 3.0), 100.0, 1e-9);
  EXPECT_NEAR(predict_cube_center_count(0.025, 12, 3.0) / predict_cube_center_count(0.05, 12, 3.0), 16.0, 1e-9);

  EXPECT_THROW(predict_center_count(0.0, 1, 2.0), InvalidArgument);
  EXPECT_THROW(predict_center_count(0.1, 1, -1.0), InvalidArgument);
  EXPECT_THROW(predict_cube_center_count(0.1, 3, 0.0), InvalidArgument);
}

TEST(Predictors, Monotonicity) {
  for (double eps : {0.01, 0.05, 0.2}) {
    for (double sbar : {0.75, 1.5, 3.0}) {
      for (int ell : {1, 2, 3}) {
        const double n = predict_center_count(eps, ell, sbar);
        EXPECT_LT(n, predict_center_count(eps * 0.9, ell, sbar));
        EXPECT_GT(n, predict_center_count(eps, ell, sbar * 1.1));
        EXPECT_LT(n, predict_center_count(eps, ell + 1, sbar));
      }
    }
  }
}

TEST(FitOrder, PlantedSlopes) {
  for (double planted : {-3.5, 0.5, 2.0, 4.25}) {
    std::vector<double> xs, ys;
    for (int i = 0; i < 6; ++i) {
      xs.push_back(0.5 / (1 << i));
      ys.push_back(3.0 * std::pow(xs.back(), planted));
    }
    const FitResult fit = fit_order(xs, ys);
    EXPECT_NEAR(fit.slope, planted, 1e-9);
    EXPECT_NEAR(fit.r2, 1.0, 1e-12);
    EXPECT_EQ(fit.used_rows, 6);
  }
  const std::vector<double> xs{1, 2, 4, 8}, flat{0.3, 0.3, 0.3, 0.3};
  EXPECT_NEAR(fit_order(xs, flat).slope, 0.0, 1e-12);
}

TEST(FitOrder, DropsFloorRowsAndNeedsThree) {
  RateTable t;
  for (int i = 0; i < 5; ++i) {
    RateRow r;
    r.count = 8 << i;
    r.fill = 1.0 / r.count;
    r.sup_err = i < 3 ? r.fill * r.fill : 1e-12;
    r.sup_power = r.fill;
    t.rows.push_back(r);
  }
  EXPECT_EQ(usable_rows(t, RateY::kSupErr), 3);
  const FitResult fit = fit_order(t, RateX::kFill, RateY::kSupErr);
  EXPECT_NEAR(fit.slope, 2.0, 1e-9);
  EXPECT_EQ(fit.used_rows, 3);
  EXPECT_NEAR(fit_order(t, RateX::kCount, RateY::kSupPower).slope, -1.0, 1e-9);
  t.rows[2].sup_err = 0.0;
  EXPECT_THROW(fit_order(t, RateX::kFill, RateY::kSupErr), InvalidArgument);
}

TEST(Curse, Examples) {
  const std::vector<int> dims{3, 6, 12};
  const auto rows = curse_comparison(0.05, 3.0, 1, 2.0, dims);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].manifold_count, rows[0].manifold_count);
    EXPECT_DOUBLE_EQ(rows[i].cube_count, std::pow(0.05, -dims[i] / 3.0));
    EXPECT_DOUBLE_EQ(rows[i].ratio, rows[i].cube_count / rows[i].manifold_count);
    if (i) EXPECT_GT(rows[i].ratio, rows[i - 1].ratio);
  }
  // doubling n squares the cube count when anchored at (1, 1)
  EXPECT_NEAR(rows[1].cube_count, rows[0].cube_count * rows[0].cube_count, 1e-9 * rows[1].cube_count);

  const std::vector<int> same{2};
  const Calibration cal{0.1, 30.0};
  EXPECT_DOUBLE_EQ(curse_comparison(0.1, 2.5, 2, 2.5, same, cal)[0].ratio, 1.0);
}

namespace {

const std::vector<int> kCounts{8, 16, 32};

OperatorKernel study_kernel() { return OperatorKernel::diagonal(ScalarKernel::matern(2.5, 0.5), 1); }

StudyOptions small_options() {
  StudyOptions o;
  o.cloud_count = 1024;
  return o;
}

}  // namespace

TEST(ConvergenceStudy, ZeroTarget) {
  const auto circle = Manifold::circle(1.0, 3);
  const KernelFunction zero(study_kernel(), dense_candidates(circle, 5), Eigen::VectorXd::Zero(5));
  const RateTable t = convergence_study(study_kernel(), circle, zero, kCounts, small_options());
  ASSERT_EQ(t.rows.size(), 3u);
  for (const auto& r : t.rows) {
    EXPECT_EQ(r.sup_err, 0.0);
    EXPECT_EQ(r.sup_err_off, 0.0);
  }
}

TEST(ConvergenceStudy, SpanTargetIsReproduced) {
  const auto circle = Manifold::circle(1.0, 3);
  const Eigen::MatrixXd cand = dense_candidates(circle, dense_candidate_count(circle, kCounts.back()));
  const CenterSet first = farthest_point_sample(circle, kCounts.front(), cand);
  Eigen::VectorXd theta(kCounts.front());
  for (int i = 0; i < theta.size(); ++i) theta[i] = std::cos(1.0 + i);
  const KernelFunction target(study_kernel(), first.points, theta);
  const RateTable t = convergence_study(study_kernel(), circle, target, kCounts, small_options());
  for (const auto& r : t.rows) EXPECT_LE(r.sup_err, 1e-6);
}

TEST(ConvergenceStudy, BumpTargetRowsRespectBoundChain) {
  const auto circle = Manifold::circle(1.0, 3);
  Bump bump;
  bump.center = Eigen::VectorXd::Constant(1, 0.3);
  const KernelFunction target = make_bump_target(study_kernel(), circle, bump, 400);
  const RateTable t = convergence_study(study_kernel(), circle, target, kCounts, small_options());
  EXPECT_EQ(t.n, 3);
  EXPECT_EQ(t.ell, 1);
  EXPECT_DOUBLE_EQ(t.s, 4.0);
  EXPECT_DOUBLE_EQ(t.sbar, 3.0);
  const double norm = rkhs_norm(target);
  EXPECT_NEAR(t.target_norm, norm, 1e-12);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    EXPECT_LE(r.sup_err, r.sup_power * norm + 1e-8);
    EXPECT_LE(r.sup_err_off, r.sup_power_off * norm + 1e-8);
    EXPECT_LE(r.rkhs_residual, norm + 1e-12);
    if (i) {
      EXPECT_LT(r.fill, t.rows[i - 1].fill);
      EXPECT_LE(r.sup_err, 1.1 * t.rows[i - 1].sup_err);
    }
  }
  double lo = 1e300, hi = 0;
  for (const auto& r : t.rows) {
    lo = std::min(lo, r.count * r.fill);
    hi = std::max(hi, r.count * r.fill);
  }
  EXPECT_LE(hi / lo, 8.0);
}

TEST(ConvergenceStudy, RowsIndependentOfListComposition) {
  const auto circle = Manifold::circle(1.0, 3);
  Bump bump;
  bump.center = Eigen::VectorXd::Constant(1, 0.6);
  const KernelFunction target = make_bump_target(study_kernel(), circle, bump, 200);
  const RateTable a = convergence_study(study_kernel(), circle, target, kCounts, small_options());
  const std::vector<int> tail{16, 32};
  const RateTable b = convergence_study(study_kernel(), circle, target, tail, small_options());
  ASSERT_EQ(b.rows.size(), 2u);
  for (std::size_t i = 0; i < b.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i + 1].sup_err, b.rows[i].sup_err);
    EXPECT_EQ(a.rows[i + 1].fill, b.rows[i].fill);
  }
}

TEST(RateCsv, HeaderAndRows) {
  RateTable t;
  RateRow r;
  r.count = 8;
  r.fill = 0.5;
  r.sup_err = 0.25;
  r.sup_power = 0.125;
  t.rows.push_back(r);
  std::ostringstream os;
  write_rate_csv(os, t);
  EXPECT_EQ(os.str(), "N,h,sup_err,sup_power\n8,0.5,0.25,0.125\n");
  std::ostringstream ll;
  write_loglog(ll, t, RateX::kFill, RateY::kSupErr);
  double x = 0, y = 0;
  std::istringstream in(ll.str());
  in >> x >> y;
  EXPECT_NEAR(x, std::log10(0.5), 1e-12);
  EXPECT_NEAR(y, std::log10(0.25), 1e-12);
}
