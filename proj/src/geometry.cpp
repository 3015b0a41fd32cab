#include "mvrkhs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/QR>

#include "mvrkhs/csv.hpp"
#include "mvrkhs/error.hpp"

namespace mvrkhs {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int grid_side(int count) {
  int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
  while (side * side < count) ++side;
  return side;
}

}  // namespace

std::string to_string(Shape shape) {
  switch (shape) {
    case Shape::kCircle: return "circle";
    case Shape::kTorus: return "torus";
    case Shape::kSphere: return "sphere";
    case Shape::kLissajous: return "lissajous";
  }
  return "unknown";
}

Shape parse_shape(const std::string& name) {
  if (name == "circle") return Shape::kCircle;
  if (name == "torus") return Shape::kTorus;
  if (name == "sphere") return Shape::kSphere;
  if (name == "lissajous") return Shape::kLissajous;
  throw InvalidArgument("unknown manifold shape '" + name + "'");
}

Manifold::Manifold(Shape shape, int intrinsic_dim, int ambient_dim, std::vector<double> radii)
    : shape_(shape), intrinsic_dim_(intrinsic_dim), ambient_dim_(ambient_dim), radii_(std::move(radii)) {
  for (double r : radii_) {
    if (!(r > 0.0) || !std::isfinite(r)) throw InvalidArgument("manifold radii must be positive");
  }
}

Manifold Manifold::circle(double radius, int ambient_dim) {
  if (ambient_dim < 2) throw InvalidArgument("circle needs ambient dimension >= 2");
  Manifold m(Shape::kCircle, 1, ambient_dim, {radius});
  m.finalize();
  return m;
}

Manifold Manifold::torus(double major_radius, double minor_radius, int ambient_dim) {
  if (ambient_dim < 3) throw InvalidArgument("torus needs ambient dimension >= 3");
  if (!(minor_radius < major_radius)) throw InvalidArgument("torus minor radius must be below the major radius");
  Manifold m(Shape::kTorus, 2, ambient_dim, {major_radius, minor_radius});
  m.finalize();
  return m;
}

Manifold Manifold::sphere(double radius, int ambient_dim) {
  if (ambient_dim < 3) throw InvalidArgument("sphere needs ambient dimension >= 3");
  Manifold m(Shape::kSphere, 2, ambient_dim, {radius});
  m.finalize();
  return m;
}

Manifold Manifold::lissajous(int ambient_dim, std::vector<int> frequencies, std::vector<double> phases,
                             double amplitude) {
  if (ambient_dim < 2) throw InvalidArgument("lissajous curve needs ambient dimension >= 2");
  if (static_cast<int>(frequencies.size()) != ambient_dim || static_cast<int>(phases.size()) != ambient_dim) {
    throw DimensionMismatch("lissajous frequencies and phases must have one entry per ambient coordinate");
  }
  for (int f : frequencies) {
    if (f < 1) throw InvalidArgument("lissajous frequencies must be positive integers");
  }
  Manifold m(Shape::kLissajous, 1, ambient_dim, {amplitude});
  m.frequencies_ = std::move(frequencies);
  m.phases_ = std::move(phases);
  m.finalize();
  return m;
}

Manifold Manifold::lissajous(int ambient_dim, double amplitude) {
  std::vector<int> freqs(ambient_dim);
  std::vector<double> phases(ambient_dim);
  for (int k = 0; k < ambient_dim; ++k) {
    freqs[k] = k + 1;
    phases[k] = std::numbers::pi * k / (2.0 * ambient_dim);
  }
  return lissajous(ambient_dim, std::move(freqs), std::move(phases), amplitude);
}

void Manifold::finalize() {
  switch (shape_) {
    case Shape::kCircle:
      measure_ = kTwoPi * radii_[0];
      diameter_ = 2.0 * radii_[0];
      break;
    case Shape::kTorus:
      measure_ = kTwoPi * kTwoPi * radii_[0] * radii_[1];
      diameter_ = 2.0 * (radii_[0] + radii_[1]);
      break;
    case Shape::kSphere:
      measure_ = 2.0 * kTwoPi * radii_[0] * radii_[0];
      diameter_ = 2.0 * radii_[0];
      break;
    case Shape::kLissajous: {
      // periodic trapezoid rule: spectrally accurate for the smooth speed
      measure_ = quadrature(20000).weights.sum();
      const Eigen::MatrixXd pts = dense_candidates(*this, 512);
      double diam = 0.0;
      for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        for (Eigen::Index j = i + 1; j < pts.cols(); ++j) diam = std::max(diam, (pts.col(i) - pts.col(j)).norm());
      }
      diameter_ = diam;
      break;
    }
  }
}

Point Manifold::chart(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  if (u.size() != intrinsic_dim_) throw DimensionMismatch("chart parameter has wrong dimension");
  Point x = Point::Zero(ambient_dim_);
  switch (shape_) {
    case Shape::kCircle: {
      const double th = kTwoPi * u[0];
      x[0] = radii_[0] * std::cos(th);
      x[1] = radii_[0] * std::sin(th);
      break;
    }
    case Shape::kTorus: {
      const double th = kTwoPi * u[0];
      const double ph = kTwoPi * u[1];
      const double ring = radii_[0] + radii_[1] * std::cos(ph);
      x[0] = ring * std::cos(th);
      x[1] = ring * std::sin(th);
      x[2] = radii_[1] * std::sin(ph);
      break;
    }
    case Shape::kSphere: {
      const double th = std::numbers::pi * u[0];
      const double ph = kTwoPi * u[1];
      x[0] = radii_[0] * std::sin(th) * std::cos(ph);
      x[1] = radii_[0] * std::sin(th) * std::sin(ph);
      x[2] = radii_[0] * std::cos(th);
      break;
    }
    case Shape::kLissajous:
      for (int k = 0; k < ambient_dim_; ++k) {
        x[k] = radii_[0] * std::sin(kTwoPi * frequencies_[k] * u[0] + phases_[k]);
      }
      break;
  }
  return x;
}

Eigen::MatrixXd Manifold::chart_jacobian(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  if (u.size() != intrinsic_dim_) throw DimensionMismatch("chart parameter has wrong dimension");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(ambient_dim_, intrinsic_dim_);
  switch (shape_) {
    case Shape::kCircle: {
      const double th = kTwoPi * u[0];
      jac(0, 0) = -kTwoPi * radii_[0] * std::sin(th);
      jac(1, 0) = kTwoPi * radii_[0] * std::cos(th);
      break;
    }
    case Shape::kTorus: {
      const double th = kTwoPi * u[0];
      const double ph = kTwoPi * u[1];
      const double ring = radii_[0] + radii_[1] * std::cos(ph);
      jac(0, 0) = -kTwoPi * ring * std::sin(th);
      jac(1, 0) = kTwoPi * ring * std::cos(th);
      jac(0, 1) = -kTwoPi * radii_[1] * std::sin(ph) * std::cos(th);
      jac(1, 1) = -kTwoPi * radii_[1] * std::sin(ph) * std::sin(th);
      jac(2, 1) = kTwoPi * radii_[1] * std::cos(ph);
      break;
    }
    case Shape::kSphere: {
      const double th = std::numbers::pi * u[0];
      const double ph = kTwoPi * u[1];
      const double r = radii_[0];
      jac(0, 0) = std::numbers::pi * r * std::cos(th) * std::cos(ph);
      jac(1, 0) = std::numbers::pi * r * std::cos(th) * std::sin(ph);
      jac(2, 0) = -std::numbers::pi * r * std::sin(th);
      jac(0, 1) = -kTwoPi * r * std::sin(th) * std::sin(ph);
      jac(1, 1) = kTwoPi * r * std::sin(th) * std::cos(ph);
      break;
    }
    case Shape::kLissajous:
      for (int k = 0; k < ambient_dim_; ++k) {
        jac(k, 0) = radii_[0] * kTwoPi * frequencies_[k] * std::cos(kTwoPi * frequencies_[k] * u[0] + phases_[k]);
      }
      break;
  }
  return jac;
}

double Manifold::volume_element(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  const Eigen::MatrixXd jac = chart_jacobian(u);
  return std::sqrt(std::max(0.0, (jac.transpose() * jac).determinant()));
}

Eigen::MatrixXd Manifold::normal_basis(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  const Eigen::MatrixXd jac = chart_jacobian(u);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(jac);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(ambient_dim_, ambient_dim_);
  return q.rightCols(ambient_dim_ - intrinsic_dim_);
}

double Manifold::distance_to(const Point& x) const {
  if (x.size() != ambient_dim_) throw DimensionMismatch("point has wrong ambient dimension");
  switch (shape_) {
    case Shape::kCircle: {
      const double planar = x.head<2>().norm() - radii_[0];
      return std::sqrt(planar * planar + x.tail(ambient_dim_ - 2).squaredNorm());
    }
    case Shape::kSphere: {
      const double radial = x.head<3>().norm() - radii_[0];
      return std::sqrt(radial * radial + x.tail(ambient_dim_ - 3).squaredNorm());
    }
    case Shape::kTorus: {
      const double ring = x.head<2>().norm() - radii_[0];
      const double tube = std::sqrt(ring * ring + x[2] * x[2]) - radii_[1];
      return std::sqrt(tube * tube + x.tail(ambient_dim_ - 3).squaredNorm());
    }
    case Shape::kLissajous: {
      // coarse scan, then golden-section refinement around the best few nodes
      constexpr int kScan = 4096;
      std::vector<std::pair<double, double>> best;
      for (int i = 0; i < kScan; ++i) {
        const double t = static_cast<double>(i) / kScan;
        Eigen::VectorXd u(1);
        u[0] = t;
        best.emplace_back((chart(u) - x).squaredNorm(), t);
      }
      std::partial_sort(best.begin(), best.begin() + 4, best.end());
      double result = std::numeric_limits<double>::infinity();
      const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
      for (int s = 0; s < 4; ++s) {
        double a = best[s].second - 1.0 / kScan;
        double b = best[s].second + 1.0 / kScan;
        auto dist2 = [&](double t) {
          Eigen::VectorXd u(1);
          u[0] = t;
          return (chart(u) - x).squaredNorm();
        };
        for (int it = 0; it < 80; ++it) {
          const double c = b - invphi * (b - a);
          const double d = a + invphi * (b - a);
          if (dist2(c) < dist2(d)) b = d; else a = c;
        }
        result = std::min({result, dist2(0.5 * (a + b)), best[s].first});
      }
      return std::sqrt(result);
    }
  }
  return std::numeric_limits<double>::infinity();
}

Eigen::MatrixXd Manifold::chart_grid(int count, bool offset) const {
  if (count < 1) throw InvalidArgument("chart grid needs a positive count");
  const double off = offset ? 0.5 : 0.0;
  if (intrinsic_dim_ == 1) {
    Eigen::MatrixXd grid(1, count);
    for (int i = 0; i < count; ++i) grid(0, i) = (i + off) / count;
    return grid;
  }
  const int side = grid_side(count);
  Eigen::MatrixXd grid(2, side * side);
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      // polar angle always at midpoints so no two nodes collapse onto a pole
      const double first_off = shape_ == Shape::kSphere ? 0.5 : off;
      grid(0, i * side + j) = (i + first_off) / side;
      grid(1, i * side + j) = (j + off) / side;
    }
  }
  return grid;
}

Quadrature Manifold::quadrature(int count) const {
  Quadrature q;
  q.chart = chart_grid(count, true);
  const Eigen::Index size = q.chart.cols();
  q.points.resize(ambient_dim_, size);
  q.weights.resize(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    q.points.col(i) = chart(q.chart.col(i));
    q.weights[i] = volume_element(q.chart.col(i)) / static_cast<double>(size);
  }
  return q;
}

CenterSet CenterSet::prefix(Eigen::Index count) const {
  if (count < 0 || count > size()) throw InvalidArgument("center prefix larger than the set");
  return CenterSet{points.leftCols(count), source};
}

Eigen::MatrixXd dense_candidates(const Manifold& manifold, int count) {
  if (count < (1 << manifold.intrinsic_dim())) throw InvalidArgument("candidate count must be at least 2^l");
  const Eigen::MatrixXd grid = manifold.chart_grid(count, false);
  Eigen::MatrixXd pts(manifold.ambient_dim(), grid.cols());
  for (Eigen::Index i = 0; i < grid.cols(); ++i) pts.col(i) = manifold.chart(grid.col(i));
  return pts;
}

CenterSet farthest_point_sample(const Manifold& manifold, int count, const Eigen::MatrixXd& candidates) {
  if (candidates.cols() == 0) throw InvalidArgument("farthest_point_sample: no candidates");
  if (candidates.rows() != manifold.ambient_dim()) throw DimensionMismatch("candidates have wrong ambient dimension");
  if (count < 1) throw InvalidArgument("farthest_point_sample: count must be positive");
  if (count > candidates.cols()) {
    std::ostringstream os;
    os << "farthest_point_sample: requested " << count << " centers from " << candidates.cols() << " candidates";
    throw InvalidArgument(os.str());
  }
  const Eigen::Index total = candidates.cols();
  Eigen::VectorXd nearest = Eigen::VectorXd::Constant(total, std::numeric_limits<double>::infinity());
  CenterSet out{Eigen::MatrixXd(candidates.rows(), count), CenterSource::kManifold};
  Eigen::Index next = 0;
  for (int k = 0; k < count; ++k) {
    out.points.col(k) = candidates.col(next);
    const Eigen::VectorXd chosen = candidates.col(next);
    Eigen::Index arg = 0;
    double far = -1.0;
    for (Eigen::Index i = 0; i < total; ++i) {
      nearest[i] = std::min(nearest[i], (candidates.col(i) - chosen).squaredNorm());
      if (nearest[i] > far) {
        far = nearest[i];
        arg = i;
      }
    }
    next = arg;
  }
  return out;
}

double fill_distance(const CenterSet& centers, const Eigen::MatrixXd& candidates) {
  if (centers.size() == 0 || candidates.cols() == 0) throw InvalidArgument("fill_distance: empty input");
  if (centers.points.rows() != candidates.rows()) throw DimensionMismatch("fill_distance: dimension mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < candidates.cols(); ++i) {
    double near = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < centers.size(); ++j) {
      near = std::min(near, (candidates.col(i) - centers.points.col(j)).squaredNorm());
    }
    worst = std::max(worst, near);
  }
  return std::sqrt(worst);
}

double separation_radius(const CenterSet& centers) {
  if (centers.size() < 2) throw InvalidArgument("separation_radius needs at least two centers");
  double closest = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < centers.size(); ++i) {
    for (Eigen::Index j = i + 1; j < centers.size(); ++j) {
      closest = std::min(closest, (centers.points.col(i) - centers.points.col(j)).squaredNorm());
    }
  }
  return 0.5 * std::sqrt(closest);
}

double quasiuniformity_ratio(double fill, double separation) {
  if (!(separation > 0.0)) throw InvalidArgument("quasiuniformity_ratio: zero separation (duplicate centers)");
  return fill / separation;
}

std::vector<ScalingRow> count_scaling_check(const Manifold& manifold, std::span<const int> counts,
                                            const Eigen::MatrixXd& candidates) {
  std::vector<ScalingRow> rows;
  int previous = 0;
  for (int n : counts) {
    if (n <= previous) throw InvalidArgument("count_scaling_check: counts must be increasing");
    previous = n;
    if (n < 2) continue;  // separation undefined
    const CenterSet centers = farthest_point_sample(manifold, n, candidates);
    const double h = fill_distance(centers, candidates);
    rows.push_back({n, h, separation_radius(centers), n * std::pow(h, manifold.intrinsic_dim())});
  }
  return rows;
}

std::vector<ScalingRow> count_scaling_check(const Manifold& manifold, std::span<const int> counts) {
  if (counts.empty()) return {};
  const int largest = *std::max_element(counts.begin(), counts.end());
  return count_scaling_check(manifold, counts, dense_candidates(manifold, dense_candidate_count(manifold, largest)));
}

int dense_candidate_count(const Manifold& manifold, int count, int factor) {
  if (manifold.intrinsic_dim() == 1) return factor * count;
  const int side = grid_side(count) * factor;
  return side * side;
}

void write_centers_csv(std::ostream& os, const CenterSet& centers) {
  for (int k = 0; k < centers.ambient_dim(); ++k) os << (k ? ",x" : "x") << k + 1;
  os << '\n';
  for (Eigen::Index i = 0; i < centers.size(); ++i) {
    csv::write_row(os, centers.points.col(i));
    os << '\n';
  }
}

}  // namespace mvrkhs
