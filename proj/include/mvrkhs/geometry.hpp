#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvrkhs/kernel.hpp"

namespace mvrkhs {

enum class Shape { kCircle, kTorus, kSphere, kLissajous };

std::string to_string(Shape shape);
Shape parse_shape(const std::string& name);

/// Quadrature rule on a manifold: chart parameters (ℓ×Q), their images in
/// ℝⁿ (n×Q) and positive weights summing to approximately μ(ℳ).
struct Quadrature {
  Eigen::MatrixXd chart;
  Eigen::MatrixXd points;
  Eigen::VectorXd weights;

  Eigen::Index size() const noexcept { return weights.size(); }
};

/// Chart-parameterized ℓ-dimensional compact submanifold of ℝⁿ. The chart
/// domain is [0,1]^ℓ. Built-in shapes live in the leading coordinates and are
/// padded with zeros up to the ambient dimension, which is an isometric
/// embedding.
class Manifold {
 public:
  /// Circle of the given radius in the (x₁, x₂) plane; ambient_dim ≥ 2.
  static Manifold circle(double radius, int ambient_dim = 2);
  /// Torus with major radius R and minor radius r in ℝ³ (padded to n ≥ 3).
  static Manifold torus(double major_radius, double minor_radius, int ambient_dim = 3);
  static Manifold sphere(double radius, int ambient_dim = 3);
  /// Closed curve t ↦ a·(sin(2π f₁ t + φ₁), …, sin(2π fₙ t + φₙ)).
  /// Frequencies must be positive integers so the curve closes.
  static Manifold lissajous(int ambient_dim, std::vector<int> frequencies,
                            std::vector<double> phases, double amplitude = 1.0);
  /// Default Lissajous curve with frequencies 1..n and phases π·k/(2n).
  static Manifold lissajous(int ambient_dim, double amplitude = 1.0);

  Shape shape() const noexcept { return shape_; }
  int intrinsic_dim() const noexcept { return intrinsic_dim_; }
  int ambient_dim() const noexcept { return ambient_dim_; }
  const std::vector<double>& radii() const noexcept { return radii_; }

  Point chart(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  /// Analytic derivative of the chart, n×ℓ.
  Eigen::MatrixXd chart_jacobian(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  /// sqrt(det(JᵀJ)).
  double volume_element(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  /// Orthonormal basis of the normal space at chart(u), n×(n-ℓ).
  Eigen::MatrixXd normal_basis(const Eigen::Ref<const Eigen::VectorXd>& u) const;

  /// Euclidean distance from x to the manifold.
  double distance_to(const Point& x) const;
  /// Arc length / surface area.
  double measure() const noexcept { return measure_; }
  /// Diameter of the manifold in the ambient metric.
  double diameter() const noexcept { return diameter_; }

  /// Uniform chart grid; ℓ = 1 uses count points, ℓ = 2 uses ⌈√count⌉² points.
  /// `offset` shifts grid nodes to cell midpoints (used by quadrature).
  Eigen::MatrixXd chart_grid(int count, bool offset) const;

  /// Midpoint chart-grid quadrature with Jacobian-corrected weights.
  Quadrature quadrature(int count) const;

 private:
  Manifold(Shape shape, int intrinsic_dim, int ambient_dim, std::vector<double> radii);
  void finalize();

  Shape shape_;
  int intrinsic_dim_;
  int ambient_dim_;
  std::vector<double> radii_;
  std::vector<int> frequencies_;
  std::vector<double> phases_;
  double measure_ = 0.0;
  double diameter_ = 0.0;
};

enum class CenterSource { kManifold, kCube };

/// Pairwise distinct centers, stored as columns (n×N).
struct CenterSet {
  Eigen::MatrixXd points;
  CenterSource source = CenterSource::kManifold;

  Eigen::Index size() const noexcept { return points.cols(); }
  int ambient_dim() const noexcept { return static_cast<int>(points.rows()); }
  /// First `count` centers (a nested subset for greedy samples).
  CenterSet prefix(Eigen::Index count) const;
};

/// At least M chart-grid points on ℳ (n × ≥M); requires M ≥ 2^ℓ.
Eigen::MatrixXd dense_candidates(const Manifold& manifold, int count);

/// Greedy farthest-point selection starting from candidate 0; ties resolve to
/// the lowest candidate index, so output is deterministic.
CenterSet farthest_point_sample(const Manifold& manifold, int count, const Eigen::MatrixXd& candidates);

/// max over candidates of the distance to the nearest center.
double fill_distance(const CenterSet& centers, const Eigen::MatrixXd& candidates);

/// ½ · min over distinct pairs of ‖ξᵢ - ξⱼ‖. Requires N ≥ 2.
double separation_radius(const CenterSet& centers);

/// h / r; r = 0 means duplicate centers and is rejected.
double quasiuniformity_ratio(double fill, double separation);

struct ScalingRow {
  int count;
  double fill;
  double separation;
  double scaled_count;  // N·h^ℓ
};

/// Farthest-point samples of each size in `counts` (increasing, ≥ 2), with
/// their fill distance measured against `candidates`.
std::vector<ScalingRow> count_scaling_check(const Manifold& manifold, std::span<const int> counts,
                                            const Eigen::MatrixXd& candidates);
/// Same with a candidate cloud 50× denser per dimension than the largest sample.
std::vector<ScalingRow> count_scaling_check(const Manifold& manifold, std::span<const int> counts);

/// Candidate count giving `factor`× more points per dimension than `count`.
int dense_candidate_count(const Manifold& manifold, int count, int factor = 50);

/// One center per row, ambient coordinates.
void write_centers_csv(std::ostream& os, const CenterSet& centers);

}  // namespace mvrkhs
