#include "mvrkhs/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "mvrkhs/csv.hpp"
#include "mvrkhs/error.hpp"

namespace mvrkhs {
namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidArgument(std::string(name) + " must be positive and finite");
  }
}

std::string describe(const OperatorKernel& kernel) {
  std::ostringstream os;
  os << to_string(kernel.scalar().family()) << "(smoothness=" << kernel.scalar().smoothness()
     << ",lengthscale=" << kernel.scalar().lengthscale() << ",m=" << kernel.output_dim() << ")";
  return os.str();
}

std::string describe(const Manifold& manifold) {
  std::ostringstream os;
  os << to_string(manifold.shape()) << "(radii=";
  for (std::size_t i = 0; i < manifold.radii().size(); ++i) os << (i ? ";" : "") << manifold.radii()[i];
  os << ",n=" << manifold.ambient_dim() << ")";
  return os.str();
}

/// Cloud points pushed off ℳ along every normal direction, both signs.
Eigen::MatrixXd normal_probes(const Manifold& manifold, const Eigen::MatrixXd& chart, int stride, double offset) {
  const int codim = manifold.ambient_dim() - manifold.intrinsic_dim();
  if (codim == 0 || stride <= 0) return Eigen::MatrixXd(manifold.ambient_dim(), 0);
  std::vector<Point> probes;
  for (Eigen::Index q = 0; q < chart.cols(); q += stride) {
    const Point base = manifold.chart(chart.col(q));
    const Eigen::MatrixXd normals = manifold.normal_basis(chart.col(q));
    for (int j = 0; j < codim; ++j) {
      probes.push_back(base + offset * normals.col(j));
      probes.push_back(base - offset * normals.col(j));
    }
  }
  Eigen::MatrixXd out(manifold.ambient_dim(), static_cast<Eigen::Index>(probes.size()));
  for (std::size_t i = 0; i < probes.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = probes[i];
  return out;
}

Eigen::MatrixXd chart_image(const Manifold& manifold, const Eigen::MatrixXd& chart) {
  Eigen::MatrixXd out(manifold.ambient_dim(), chart.cols());
  for (Eigen::Index q = 0; q < chart.cols(); ++q) out.col(q) = manifold.chart(chart.col(q));
  return out;
}

double sup_residual(const KernelFunction& target, const KernelFunction& approx, const Eigen::MatrixXd& cloud) {
  if (cloud.cols() == 0) return 0.0;
  return (target.evaluate(cloud) - approx.evaluate(cloud)).colwise().norm().maxCoeff();
}

double y_value(const RateRow& row, RateY y) { return y == RateY::kSupErr ? row.sup_err : row.sup_power; }

}  // namespace

ReducedSmoothness reduced_smoothness(double s, int n, int ell) {
  require_positive(s, "smoothness s");
  if (n < 1 || ell < 1 || ell > n) {
    throw InvalidArgument("reduced_smoothness: need 1 <= l <= n, got l=" + std::to_string(ell) +
                          ", n=" + std::to_string(n));
  }
  ReducedSmoothness out;
  out.value = s - 0.5 * (n - ell);
  out.embeds_continuously = out.value > 0.5 * ell;
  if (!(s > 0.5 * n)) {
    out.warnings.push_back("s <= n/2: the global native space does not embed in continuous functions");
  }
  if (!out.embeds_continuously) {
    out.warnings.push_back("reduced smoothness <= l/2: the restricted space does not embed in continuous functions");
  }
  return out;
}

double predict_center_count(double epsilon, int ell, double sbar, const Calibration& cal) {
  require_positive(epsilon, "epsilon");
  require_positive(sbar, "reduced smoothness");
  require_positive(cal.epsilon, "calibration epsilon");
  require_positive(cal.count, "calibration count");
  if (ell < 1) throw InvalidArgument("intrinsic dimension must be >= 1");
  return cal.count * std::pow(cal.epsilon / epsilon, static_cast<double>(ell) / sbar);
}

double predict_cube_center_count(double epsilon, int n, double s, const Calibration& cal) {
  // same law with the ambient dimension and full smoothness
  return predict_center_count(epsilon, n, s, cal);
}

RateTable convergence_study(const OperatorKernel& kernel, const Manifold& manifold, const KernelFunction& target,
                            std::span<const int> counts, const StudyOptions& options) {
  if (counts.empty()) throw InvalidArgument("convergence_study: empty N list");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 2 || (i > 0 && counts[i] <= counts[i - 1])) {
      throw InvalidArgument("convergence_study: N list must be strictly increasing and >= 2");
    }
  }
  if (target.ambient_dim() != manifold.ambient_dim()) {
    throw DimensionMismatch("convergence_study: target and manifold live in different ambient spaces");
  }
  const double tol = 1e-8 * std::max(1.0, manifold.diameter());
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    if (manifold.distance_to(target.centers().col(i)) > tol) {
      throw InvalidArgument("convergence_study: target center " + std::to_string(i) + " is off the manifold");
    }
  }

  RateTable table;
  table.kernel = describe(kernel);
  table.manifold = describe(manifold);
  table.target = options.target_id;
  table.n = manifold.ambient_dim();
  table.ell = manifold.intrinsic_dim();
  if (const auto s = kernel.scalar().decay_order(table.n)) {
    table.s = *s;
    table.sbar = reduced_smoothness(*s, table.n, table.ell).value;
  }
  table.target_norm = rkhs_norm(target);

  const int largest = counts.back();
  const Eigen::MatrixXd candidates =
      dense_candidates(manifold, dense_candidate_count(manifold, largest, options.candidate_factor));
  const CenterSet all = farthest_point_sample(manifold, largest, candidates);

  const int cloud_count = options.cloud_count > 0 ? options.cloud_count : std::max(4096, 16 * largest);
  const Eigen::MatrixXd chart = manifold.chart_grid(cloud_count, true);
  const Eigen::MatrixXd cloud = chart_image(manifold, chart);
  const Eigen::MatrixXd probes =
      normal_probes(manifold, chart, options.probe_stride, options.probe_offset * manifold.diameter());

  const double norm2 = table.target_norm * table.target_norm;
  for (int count : counts) {
    const CenterSet centers = all.prefix(count);
    const Subspace sub = build_subspace(kernel, centers);
    const KernelFunction approx = project_function(sub, target);

    RateRow row;
    row.count = count;
    row.fill = fill_distance(centers, candidates);
    row.separation = separation_radius(centers);
    row.jitter = sub.jitter();
    row.sup_err = sup_residual(target, approx, cloud);
    row.sup_power = sup_power(sub, cloud, PowerKind::kP2);
    row.sup_err_off = sup_residual(target, approx, probes);
    row.sup_power_off = probes.cols() ? sup_power(sub, probes, PowerKind::kP2) : 0.0;
    // ⟨f, Π f⟩ = ‖Π f‖² for the orthogonal projection
    const double pf = rkhs_inner(approx, approx);
    row.rkhs_residual = std::sqrt(std::max(0.0, norm2 - pf));
    table.rows.push_back(row);
  }
  return table;
}

int usable_rows(const RateTable& table, RateY y) {
  return static_cast<int>(std::count_if(table.rows.begin(), table.rows.end(),
                                        [&](const RateRow& r) { return y_value(r, y) >= kMachineFloor; }));
}

FitResult fit_order(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DimensionMismatch("fit_order: x and y differ in length");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(ys[i] >= kMachineFloor)) continue;
    if (!(xs[i] > 0.0)) throw InvalidArgument("fit_order: x values must be positive");
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  const auto k = static_cast<int>(lx.size());
  if (k < 3) throw InvalidArgument("fit_order: fewer than 3 usable rows (" + std::to_string(k) + ")");
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < k; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < k; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("fit_order: x values are all equal");
  const double slope = sxy / sxx;
  double sse = 0.0;
  for (int i = 0; i < k; ++i) {
    const double r = ly[i] - my - slope * (lx[i] - mx);
    sse += r * r;
  }
  // a flat series is fitted perfectly by slope 0
  const double r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return {slope, r2, k};
}

FitResult fit_order(const RateTable& table, RateX x, RateY y) {
  std::vector<double> xs, ys;
  for (const auto& row : table.rows) {
    xs.push_back(x == RateX::kFill ? row.fill : static_cast<double>(row.count));
    ys.push_back(y_value(row, y));
  }
  return fit_order(xs, ys);
}

std::vector<CurseRow> curse_comparison(double epsilon, double s, int ell, double sbar, std::span<const int> dims,
                                       const Calibration& cal) {
  std::vector<CurseRow> rows;
  const double manifold_count = predict_center_count(epsilon, ell, sbar, cal);
  for (int n : dims) {
    if (n < ell) throw InvalidArgument("curse_comparison: ambient dimension below intrinsic dimension");
    const double cube = predict_cube_center_count(epsilon, n, s, cal);
    rows.push_back({n, cube, manifold_count, cube / manifold_count});
  }
  return rows;
}

void write_rate_csv(std::ostream& os, const RateTable& table) {
  os << "N,h,sup_err,sup_power\n";
  for (const auto& r : table.rows) {
    os << r.count << ',' << csv::number(r.fill) << ',' << csv::number(r.sup_err) << ',' << csv::number(r.sup_power)
       << '\n';
  }
}

void write_rate_sidecar(std::ostream& os, const RateTable& table) {
  os << "kernel=" << table.kernel << '\n'
     << "manifold=" << table.manifold << '\n'
     << "target=" << table.target << '\n'
     << "s=" << csv::number(table.s) << '\n'
     << "sbar=" << csv::number(table.sbar) << '\n'
     << "l=" << table.ell << '\n'
     << "n=" << table.n << '\n'
     << "target_norm=" << csv::number(table.target_norm) << '\n';
  os << "N,h,separation,sup_err,sup_power,sup_err_off,sup_power_off,rkhs_residual,N_h_l,jitter\n";
  for (const auto& r : table.rows) {
    os << r.count << ',' << csv::number(r.fill) << ',' << csv::number(r.separation) << ','
       << csv::number(r.sup_err) << ',' << csv::number(r.sup_power) << ',' << csv::number(r.sup_err_off) << ','
       << csv::number(r.sup_power_off) << ',' << csv::number(r.rkhs_residual) << ','
       << csv::number(r.count * std::pow(r.fill, table.ell)) << ',' << csv::number(r.jitter) << '\n';
  }
}

void write_loglog(std::ostream& os, const RateTable& table, RateX x, RateY y) {
  for (const auto& r : table.rows) {
    const double xv = x == RateX::kFill ? r.fill : static_cast<double>(r.count);
    const double yv = y_value(r, y);
    if (yv <= 0.0) continue;
    os << csv::number(std::log10(xv)) << ' ' << csv::number(std::log10(yv)) << '\n';
  }
}

void write_curse_csv(std::ostream& os, std::span<const CurseRow> rows) {
  os << "n,N_cube,N_manifold,ratio\n";
  for (const auto& r : rows) {
    os << r.n << ',' << csv::number(r.cube_count) << ',' << csv::number(r.manifold_count) << ','
       << csv::number(r.ratio) << '\n';
  }
}

}  // namespace mvrkhs
