#include "mvrkhs/approximation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "mvrkhs/csv.hpp"
#include "mvrkhs/error.hpp"

namespace mvrkhs {
namespace {

constexpr Eigen::Index kChunk = 2048;

/// (K ⊗ B) with center-major ordering: entry (i·m + a, j·m + b) = K(i,j)·B(a,b).
Eigen::MatrixXd block_expand(const Eigen::MatrixXd& scalar, const Eigen::MatrixXd& weight) {
  const Eigen::Index m = weight.rows();
  Eigen::MatrixXd out(scalar.rows() * m, scalar.cols() * m);
  for (Eigen::Index j = 0; j < scalar.cols(); ++j) {
    for (Eigen::Index i = 0; i < scalar.rows(); ++i) out.block(i * m, j * m, m, m) = scalar(i, j) * weight;
  }
  return out;
}

bool same_kernel(const OperatorKernel& a, const OperatorKernel& b) {
  return a.scalar().family() == b.scalar().family() && a.scalar().smoothness() == b.scalar().smoothness() &&
         a.scalar().lengthscale() == b.scalar().lengthscale() && a.weight() == b.weight();
}

double min_pair_distance(const Eigen::MatrixXd& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < pts.cols(); ++j) best = std::min(best, (pts.col(i) - pts.col(j)).norm());
  }
  return best;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

double clamped_spectral_norm(const Eigen::MatrixXd& deficit) {
  if (deficit.rows() == 1) return std::max(0.0, deficit(0, 0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(deficit, Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues().maxCoeff());
}

double diagonal_power(const Eigen::MatrixXd& deficit) {
  return std::sqrt(deficit.diagonal().cwiseAbs().maxCoeff());
}

}  // namespace

// ---------------------------------------------------------------------------
// Subspace

Subspace Subspace::build(const OperatorKernel& kernel, const CenterSet& centers, const JitterPolicy& policy) {
  if (centers.size() == 0) return empty(kernel, centers.ambient_dim());
  kernel.scalar().check_ambient_dim(centers.ambient_dim());
  if (!centers.points.allFinite()) throw InvalidArgument("build_subspace: non-finite center coordinates");

  Subspace sub(kernel, centers);
  const Eigen::MatrixXd scalar = scalar_gram(kernel.scalar(), centers.points, centers.points);

  // A pair whose 2×2 Grammian determinant 1 − k² is at roundoff level makes
  // the system numerically singular whatever jitter is applied.
  const double eps = std::numeric_limits<double>::epsilon();
  for (Eigen::Index i = 0; i < scalar.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < scalar.cols(); ++j) {
      if (1.0 - scalar(i, j) * scalar(i, j) <= 64.0 * eps) {
        const double sep = (centers.points.col(i) - centers.points.col(j)).norm();
        std::ostringstream os;
        os << "ill-conditioned center set: centers " << i << " and " << j
           << " coincide numerically (minimum separation " << sep << ")";
        throw IllConditioned(os.str(), sep);
      }
    }
  }

  sub.grammian_ = block_expand(scalar, kernel.weight());
  const Eigen::Index dim = sub.grammian_.rows();
  const double diag = sub.grammian_.diagonal().maxCoeff();
  const double pivot_floor = static_cast<double>(dim) * eps * diag;
  for (double jitter : policy.ladder) {
    Eigen::MatrixXd shifted = sub.grammian_;
    shifted.diagonal().array() += jitter;
    sub.llt_.compute(shifted);
    if (sub.llt_.info() != Eigen::Success) continue;
    const Eigen::VectorXd pivots = sub.llt_.matrixLLT().diagonal();
    if (!pivots.allFinite() || pivots.minCoeff() * pivots.minCoeff() <= pivot_floor) continue;
    sub.jitter_ = jitter;
    return sub;
  }
  const double sep = min_pair_distance(centers.points);
  std::ostringstream os;
  os << "ill-conditioned center set: Cholesky failed at maximum jitter "
     << (policy.ladder.empty() ? 0.0 : policy.ladder.back()) << " (minimum separation " << sep << ")";
  throw IllConditioned(os.str(), sep);
}

Subspace Subspace::empty(const OperatorKernel& kernel, int ambient_dim) {
  Subspace sub(kernel, CenterSet{Eigen::MatrixXd(ambient_dim, 0), CenterSource::kManifold});
  sub.grammian_.resize(0, 0);
  return sub;
}

Subspace build_subspace(const OperatorKernel& kernel, const CenterSet& centers, const JitterPolicy& policy) {
  return Subspace::build(kernel, centers, policy);
}

Eigen::MatrixXd Subspace::factor() const {
  if (dim() == 0) return Eigen::MatrixXd(0, 0);
  return llt_.matrixL();
}

Eigen::MatrixXd Subspace::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != dim()) throw DimensionMismatch("Subspace::solve: right-hand side has wrong length");
  if (dim() == 0) return Eigen::MatrixXd::Zero(0, rhs.cols());
  return llt_.solve(rhs);
}

Eigen::MatrixXd Subspace::whiten(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != dim()) throw DimensionMismatch("Subspace::whiten: right-hand side has wrong length");
  if (dim() == 0) return Eigen::MatrixXd::Zero(0, rhs.cols());
  return llt_.matrixL().solve(rhs);
}

Eigen::VectorXd Subspace::section_values(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != ambient_dim()) throw DimensionMismatch("point has wrong ambient dimension");
  Eigen::VectorXd k(size());
  for (Eigen::Index i = 0; i < size(); ++i) k[i] = kernel_.scalar_unchecked(x, centers_.points.col(i));
  return k;
}

Eigen::MatrixXd Subspace::sections(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd k = section_values(x);
  const Eigen::Index m = kernel_.output_dim();
  Eigen::MatrixXd out(m, dim());
  for (Eigen::Index i = 0; i < size(); ++i) out.middleCols(i * m, m) = k[i] * kernel_.weight();
  return out;
}

// ---------------------------------------------------------------------------
// Kernel expansions

KernelFunction::KernelFunction(OperatorKernel kernel, Eigen::MatrixXd centers, Eigen::VectorXd coeffs)
    : kernel_(std::move(kernel)), centers_(std::move(centers)), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != centers_.cols() * kernel_.output_dim()) {
    throw DimensionMismatch("KernelFunction: coefficient vector must have length m*N");
  }
  if (!coeffs_.allFinite() || !centers_.allFinite()) throw InvalidArgument("KernelFunction: non-finite entries");
}

Eigen::VectorXd KernelFunction::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != ambient_dim()) throw DimensionMismatch("eval_function: point has wrong ambient dimension");
  Eigen::VectorXd k(size());
  for (Eigen::Index i = 0; i < size(); ++i) k[i] = kernel_.scalar_unchecked(x, centers_.col(i));
  return kernel_.weight() * (coeff_matrix() * k);
}

Eigen::MatrixXd KernelFunction::evaluate(const Eigen::MatrixXd& cloud) const {
  if (cloud.rows() != ambient_dim()) throw DimensionMismatch("evaluate: cloud has wrong ambient dimension");
  Eigen::MatrixXd out(output_dim(), cloud.cols());
  for (Eigen::Index start = 0; start < cloud.cols(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, cloud.cols() - start);
    const Eigen::MatrixXd k = scalar_gram(kernel_.scalar(), centers_, cloud.middleCols(start, len));
    out.middleCols(start, len) = kernel_.weight() * (coeff_matrix() * k);
  }
  return out;
}

KernelFunction project(const Subspace& sub, const Eigen::MatrixXd& samples) {
  const Eigen::Index m = sub.kernel().output_dim();
  if (samples.rows() != m || samples.cols() != sub.size()) {
    std::ostringstream os;
    os << "project: expected " << m << "x" << sub.size() << " samples, got " << samples.rows() << "x"
       << samples.cols();
    throw DimensionMismatch(os.str());
  }
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(samples.data(), samples.size());
  return KernelFunction(sub.kernel(), sub.centers().points, sub.solve(rhs));
}

KernelFunction project_function(const Subspace& sub, const KernelFunction& f) {
  return project(sub, f.evaluate(sub.centers().points));
}

Eigen::VectorXd eval_function(const KernelFunction& f, const Point& x) { return f(x); }

Eigen::MatrixXd subspace_kernel(const Subspace& sub, const Point& x1, const Point& x2) {
  const Eigen::Index m = sub.kernel().output_dim();
  if (sub.dim() == 0) return Eigen::MatrixXd::Zero(m, m);
  const Eigen::MatrixXd w1 = sub.whiten(sub.sections(x1).transpose());
  const Eigen::MatrixXd w2 = sub.whiten(sub.sections(x2).transpose());
  return w1.transpose() * w2;
}

Eigen::MatrixXd power_deficit(const Subspace& sub, const Point& x) {
  eval_scalar(sub.kernel().scalar(), x, x);  // validates the point
  if (x.size() != sub.ambient_dim()) throw DimensionMismatch("power function: point has wrong ambient dimension");
  return symmetrize(sub.kernel().weight() - subspace_kernel(sub, x, x));
}

double power2(const Subspace& sub, const Point& x) { return std::sqrt(clamped_spectral_norm(power_deficit(sub, x))); }

double power_inf(const Subspace& sub, const Point& x) { return diagonal_power(power_deficit(sub, x)); }

PowerSweep power_sweep(const Subspace& sub, const Eigen::MatrixXd& cloud) {
  if (cloud.rows() != sub.ambient_dim()) throw DimensionMismatch("power_sweep: cloud has wrong ambient dimension");
  const Eigen::Index m = sub.kernel().output_dim();
  const Eigen::MatrixXd& weight = sub.kernel().weight();
  PowerSweep out{Eigen::VectorXd(cloud.cols()), Eigen::VectorXd(cloud.cols())};
  for (Eigen::Index start = 0; start < cloud.cols(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, cloud.cols() - start);
    Eigen::MatrixXd whitened(sub.dim(), len * m);
    if (sub.dim() > 0) {
      const Eigen::MatrixXd k = scalar_gram(sub.kernel().scalar(), sub.centers().points, cloud.middleCols(start, len));
      whitened = sub.whiten(block_expand(k, weight));
    }
    for (Eigen::Index p = 0; p < len; ++p) {
      Eigen::MatrixXd deficit = weight;
      if (sub.dim() > 0) {
        const auto w = whitened.middleCols(p * m, m);
        deficit -= w.transpose() * w;
      }
      deficit = symmetrize(deficit);
      out.p2[start + p] = std::sqrt(clamped_spectral_norm(deficit));
      out.pinf[start + p] = diagonal_power(deficit);
    }
  }
  return out;
}

double sup_power(const Subspace& sub, const Eigen::MatrixXd& cloud, PowerKind which) {
  if (cloud.cols() == 0) throw InvalidArgument("sup_power: empty cloud");
  const PowerSweep sweep = power_sweep(sub, cloud);
  return which == PowerKind::kP2 ? sweep.p2.maxCoeff() : sweep.pinf.maxCoeff();
}

double pointwise_error_bound(const Subspace& sub, double f_norm, const Point& x) {
  if (!(f_norm >= 0.0)) throw InvalidArgument("pointwise_error_bound: norm must be nonnegative");
  return power2(sub, x) * f_norm;
}

double rkhs_inner(const KernelFunction& f, const KernelFunction& g) {
  if (!same_kernel(f.kernel(), g.kernel())) throw InvalidArgument("rkhs_inner: functions use different kernels");
  if (f.ambient_dim() != g.ambient_dim()) throw DimensionMismatch("rkhs_inner: ambient dimensions differ");
  if (f.size() == 0 || g.size() == 0) return 0.0;
  const Eigen::MatrixXd k = scalar_gram(f.kernel().scalar(), f.centers(), g.centers());
  // Σᵢⱼ k(ξᵢ, ζⱼ) ϑᵢᵀ B ϑ'ⱼ
  const Eigen::MatrixXd weighted = f.kernel().weight() * g.coeff_matrix();
  return (f.coeff_matrix().transpose() * weighted).cwiseProduct(k).sum();
}

double rkhs_norm(const KernelFunction& f) { return std::sqrt(std::max(0.0, rkhs_inner(f, f))); }

// ---------------------------------------------------------------------------
// Restriction / extension

RestrictedKernel::RestrictedKernel(OperatorKernel parent, Manifold domain, double tolerance)
    : parent_(std::move(parent)), domain_(std::move(domain)), tolerance_(tolerance) {}

void RestrictedKernel::require_on_domain(const Point& w) const {
  const double d = domain_.distance_to(w);
  if (!(d <= tolerance_)) {
    std::ostringstream os;
    os << "point lies " << d << " off the " << to_string(domain_.shape()) << " (tolerance " << tolerance_ << ")";
    throw InvalidArgument(os.str());
  }
}

Eigen::MatrixXd RestrictedKernel::operator()(const Point& w1, const Point& w2) const {
  require_on_domain(w1);
  require_on_domain(w2);
  return parent_(w1, w2);
}

Eigen::MatrixXd RestrictedKernel::grammian(const Eigen::MatrixXd& centers) const {
  const Eigen::Index m = parent_.output_dim();
  Eigen::MatrixXd out(centers.cols() * m, centers.cols() * m);
  for (Eigen::Index i = 0; i < centers.cols(); ++i) require_on_domain(centers.col(i));
  for (Eigen::Index i = 0; i < centers.cols(); ++i) {
    for (Eigen::Index j = 0; j < centers.cols(); ++j) {
      out.block(i * m, j * m, m, m) = parent_(centers.col(i), centers.col(j));
    }
  }
  return out;
}

double ExtensionReport::max_deviation() const {
  return std::max({restriction_extension, isometry, grammian_identity, projection_commute});
}

ExtensionReport restrict_then_extend_check(const OperatorKernel& kernel, const Manifold& manifold,
                                           const KernelFunction& f, const CenterSet& sub_centers,
                                           const Quadrature& nodes) {
  const double tol = 1e-9 * std::max(1.0, manifold.diameter());
  const RestrictedKernel restricted(kernel, manifold, tol);
  for (Eigen::Index i = 0; i < f.size(); ++i) restricted.require_on_domain(f.centers().col(i));
  for (Eigen::Index i = 0; i < sub_centers.size(); ++i) restricted.require_on_domain(sub_centers.points.col(i));
  const Eigen::Index m = kernel.output_dim();
  ExtensionReport report;

  // r = T f evaluated through the restricted kernel, at chart-mapped nodes;
  // centers were validated above so only the argument needs checking
  auto restricted_eval = [&](const Eigen::MatrixXd& centers, const Eigen::VectorXd& coeffs, const Point& w) {
    restricted.require_on_domain(w);
    Eigen::VectorXd value = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < centers.cols(); ++i) {
      value += restricted.parent()(w, centers.col(i)) * coeffs.segment(i * m, m);
    }
    return value;
  };
  Eigen::MatrixXd restricted_at_nodes(m, nodes.size());
  for (Eigen::Index q = 0; q < nodes.size(); ++q) {
    const Point w = manifold.chart(nodes.chart.col(q));
    restricted_at_nodes.col(q) = restricted_eval(f.centers(), f.coeffs(), w);
  }
  const Eigen::MatrixXd extended_at_nodes = f.evaluate(nodes.points);
  report.restriction_extension = (extended_at_nodes - restricted_at_nodes).cwiseAbs().maxCoeff();

  const Eigen::MatrixXd gram_r = restricted.grammian(f.centers());
  const Eigen::MatrixXd gram_k = block_expand(scalar_gram(kernel.scalar(), f.centers(), f.centers()), kernel.weight());
  report.grammian_identity = f.size() ? (gram_r - gram_k).cwiseAbs().maxCoeff() : 0.0;
  const double norm_r = std::sqrt(std::max(0.0, f.coeffs().dot(gram_r * f.coeffs())));
  report.isometry = std::abs(norm_r - rkhs_norm(f));

  // Π_N ℰ r in the global space
  const Subspace global = Subspace::build(kernel, sub_centers);
  const Eigen::MatrixXd global_at_nodes = project_function(global, f).evaluate(nodes.points);
  // ℰ Π̃_N r in the restricted space
  Eigen::MatrixXd samples(m, sub_centers.size());
  for (Eigen::Index i = 0; i < sub_centers.size(); ++i) {
    samples.col(i) = restricted_eval(f.centers(), f.coeffs(), sub_centers.points.col(i));
  }
  Eigen::MatrixXd gram_sub = restricted.grammian(sub_centers.points);
  gram_sub.diagonal().array() += global.jitter();
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(samples.data(), samples.size());
  const Eigen::VectorXd local_coeffs = gram_sub.llt().solve(rhs);
  Eigen::MatrixXd local_at_nodes(m, nodes.size());
  for (Eigen::Index q = 0; q < nodes.size(); ++q) {
    local_at_nodes.col(q) = restricted_eval(sub_centers.points, local_coeffs, manifold.chart(nodes.chart.col(q)));
  }
  report.projection_commute = (global_at_nodes - local_at_nodes).cwiseAbs().maxCoeff();
  return report;
}

KernelFunction apply_integral_operator(const OperatorKernel& kernel, const Manifold& manifold,
                                       const Quadrature& nodes, const Eigen::MatrixXd& samples) {
  if (nodes.points.rows() != manifold.ambient_dim()) {
    throw DimensionMismatch("apply_integral_operator: quadrature does not belong to the manifold");
  }
  if (samples.rows() != kernel.output_dim() || samples.cols() != nodes.size()) {
    throw DimensionMismatch("apply_integral_operator: samples do not align with quadrature nodes");
  }
  Eigen::MatrixXd weighted = samples * nodes.weights.asDiagonal();
  return KernelFunction(kernel, nodes.points, Eigen::Map<const Eigen::VectorXd>(weighted.data(), weighted.size()));
}

Eigen::MatrixXd bump_samples(const Manifold& manifold, const Quadrature& nodes, const Bump& bump, int output_dim) {
  const int ell = manifold.intrinsic_dim();
  if (bump.center.size() != ell) throw DimensionMismatch("bump center must have one entry per chart coordinate");
  if (!(bump.width > 0.0)) throw InvalidArgument("bump width must be positive");
  Eigen::MatrixXd v(output_dim, nodes.size());
  for (int j = 0; j < output_dim; ++j) {
    Eigen::VectorXd center = bump.center;
    center[0] += static_cast<double>(j) / (output_dim + 1);
    for (Eigen::Index q = 0; q < nodes.size(); ++q) {
      double dist2 = 0.0;
      for (int d = 0; d < ell; ++d) {
        double diff = nodes.chart(d, q) - center[d];
        const bool periodic = !(manifold.shape() == Shape::kSphere && d == 0);
        if (periodic) diff -= std::round(diff);
        dist2 += diff * diff;
      }
      v(j, q) = bump.amplitude * std::exp(-dist2 / (bump.width * bump.width));
    }
  }
  return v;
}

KernelFunction make_bump_target(const OperatorKernel& kernel, const Manifold& manifold, const Bump& bump,
                                int quadrature_count) {
  const Quadrature nodes = manifold.quadrature(quadrature_count);
  return apply_integral_operator(kernel, manifold, nodes, bump_samples(manifold, nodes, bump, kernel.output_dim()));
}

// ---------------------------------------------------------------------------
// Serialization

void write_kernel_function_csv(std::ostream& os, const KernelFunction& f) {
  const auto& k = f.kernel();
  os << "kernel," << to_string(k.scalar().family()) << ',' << csv::number(k.scalar().smoothness()) << ','
     << csv::number(k.scalar().lengthscale()) << ',' << k.output_dim() << '\n';
  os << "weight_matrix";
  for (Eigen::Index i = 0; i < k.weight().rows(); ++i) {
    for (Eigen::Index j = 0; j < k.weight().cols(); ++j) os << ',' << csv::number(k.weight()(i, j));
  }
  os << '\n';
  os << "centers," << f.size() << ',' << f.ambient_dim() << '\n';
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    csv::write_row(os, f.centers().col(i));
    os << '\n';
  }
  os << "coefficients," << f.coeffs().size() << '\n';
  for (Eigen::Index i = 0; i < f.coeffs().size(); ++i) os << csv::number(f.coeffs()[i]) << '\n';
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::vector<std::string> expect_row(std::istream& is, const std::string& tag) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("kernel function csv: missing '" + tag + "' row");
  auto cells = split_line(line);
  if (cells.empty() || cells[0] != tag) throw InvalidArgument("kernel function csv: expected '" + tag + "' row");
  return cells;
}

}  // namespace

KernelFunction read_kernel_function_csv(std::istream& is) {
  const auto head = expect_row(is, "kernel");
  if (head.size() != 5) throw InvalidArgument("kernel function csv: malformed kernel row");
  const ScalarKernel scalar(parse_kernel_family(head[1]), std::stod(head[2]), std::stod(head[3]));
  const int m = std::stoi(head[4]);
  const auto weight_row = expect_row(is, "weight_matrix");
  if (static_cast<int>(weight_row.size()) != 1 + m * m) throw InvalidArgument("kernel function csv: bad weight row");
  Eigen::MatrixXd weight(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) weight(i, j) = std::stod(weight_row[1 + i * m + j]);
  }
  const auto centers_row = expect_row(is, "centers");
  const int count = std::stoi(centers_row.at(1));
  const int n = std::stoi(centers_row.at(2));
  Eigen::MatrixXd centers(n, count);
  std::string line;
  for (int i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw InvalidArgument("kernel function csv: truncated centers block");
    const auto cells = split_line(line);
    if (static_cast<int>(cells.size()) != n) throw InvalidArgument("kernel function csv: bad center row");
    for (int d = 0; d < n; ++d) centers(d, i) = std::stod(cells[d]);
  }
  const auto coeff_row = expect_row(is, "coefficients");
  const int total = std::stoi(coeff_row.at(1));
  Eigen::VectorXd coeffs(total);
  for (int i = 0; i < total; ++i) {
    if (!std::getline(is, line)) throw InvalidArgument("kernel function csv: truncated coefficient block");
    coeffs[i] = std::stod(line);
  }
  return KernelFunction(OperatorKernel(scalar, weight), centers, coeffs);
}

void write_power_sweep_csv(std::ostream& os, const Eigen::MatrixXd& cloud, const PowerSweep& sweep) {
  for (Eigen::Index d = 0; d < cloud.rows(); ++d) os << 'x' << d + 1 << ',';
  os << "p2,pinf\n";
  for (Eigen::Index p = 0; p < cloud.cols(); ++p) {
    csv::write_row(os, cloud.col(p));
    os << ',' << csv::number(sweep.p2[p]) << ',' << csv::number(sweep.pinf[p]) << '\n';
  }
}

}  // namespace mvrkhs
