#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "mvrkhs/geometry.hpp"
#include "mvrkhs/kernel.hpp"

namespace mvrkhs {

/// Jitter levels tried in order until the Grammian admits a Cholesky factor.
struct JitterPolicy {
  std::vector<double> ladder{0.0, 1e-12, 1e-10, 1e-8};
};

/// Span of the kernel sections 𝔎(·, ξᵢ)eⱼ over N centers, with the generalized
/// Grammian 𝕂_N (block (i, j) = 𝔎(ξᵢ, ξⱼ), center-major) and a cached
/// Cholesky factor of 𝕂_N + jitter·I. N = 0 is allowed: projection is then the
/// zero map and the power function equals the full kernel diagonal.
class Subspace {
 public:
  static Subspace build(const OperatorKernel& kernel, const CenterSet& centers, const JitterPolicy& policy = {});
  static Subspace empty(const OperatorKernel& kernel, int ambient_dim);

  const OperatorKernel& kernel() const noexcept { return kernel_; }
  const CenterSet& centers() const noexcept { return centers_; }
  Eigen::Index size() const noexcept { return centers_.size(); }
  Eigen::Index dim() const noexcept { return size() * kernel_.output_dim(); }
  int ambient_dim() const noexcept { return centers_.ambient_dim(); }
  const Eigen::MatrixXd& grammian() const noexcept { return grammian_; }
  Eigen::MatrixXd factor() const;
  double jitter() const noexcept { return jitter_; }

  /// (𝕂_N + jitter·I)⁻¹ rhs; rhs may have several columns.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  /// L⁻¹ rhs for the lower Cholesky factor L.
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& rhs) const;

  /// Scalar kernel values k(x, ξᵢ), length N.
  Eigen::VectorXd section_values(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// [𝔎(x, ξ₁) … 𝔎(x, ξ_N)], m × mN.
  Eigen::MatrixXd sections(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  Subspace(OperatorKernel kernel, CenterSet centers) : kernel_(std::move(kernel)), centers_(std::move(centers)) {}

  OperatorKernel kernel_;
  CenterSet centers_;
  Eigen::MatrixXd grammian_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double jitter_ = 0.0;
};

Subspace build_subspace(const OperatorKernel& kernel, const CenterSet& centers, const JitterPolicy& policy = {});

/// Finite kernel expansion f(x) = Σᵢ 𝔎(x, ξᵢ) ϑᵢ; ϑᵢ is the i-th length-m block
/// of `coeffs` (equivalently column i of `coeff_matrix()`).
class KernelFunction {
 public:
  KernelFunction(OperatorKernel kernel, Eigen::MatrixXd centers, Eigen::VectorXd coeffs);

  const OperatorKernel& kernel() const noexcept { return kernel_; }
  const Eigen::MatrixXd& centers() const noexcept { return centers_; }
  const Eigen::VectorXd& coeffs() const noexcept { return coeffs_; }
  Eigen::Index size() const noexcept { return centers_.cols(); }
  int output_dim() const noexcept { return kernel_.output_dim(); }
  int ambient_dim() const noexcept { return static_cast<int>(centers_.rows()); }
  /// m×N view of the coefficients.
  Eigen::Map<const Eigen::MatrixXd> coeff_matrix() const {
    return {coeffs_.data(), kernel_.output_dim(), centers_.cols()};
  }

  Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Values at every column of `cloud`, m×P.
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& cloud) const;

 private:
  OperatorKernel kernel_;
  Eigen::MatrixXd centers_;
  Eigen::VectorXd coeffs_;
};

/// Interpolant/orthogonal projection of the samples F_N (m×N, column i is the
/// value at ξᵢ): Θ_N solves 𝕂_N Θ_N = F_N.
KernelFunction project(const Subspace& sub, const Eigen::MatrixXd& samples);
/// Orthogonal projection Π_N f of a kernel expansion (samples f at the centers).
KernelFunction project_function(const Subspace& sub, const KernelFunction& f);

Eigen::VectorXd eval_function(const KernelFunction& f, const Point& x);

/// 𝔎_N(x₁, x₂) = 𝔎(x₁, Ξ_N) 𝕂_N⁻¹ 𝔎(x₂, Ξ_N)ᵀ.
Eigen::MatrixXd subspace_kernel(const Subspace& sub, const Point& x1, const Point& x2);

/// Symmetrized 𝔎(x,x) − 𝔎_N(x,x).
Eigen::MatrixXd power_deficit(const Subspace& sub, const Point& x);
/// sqrt(‖𝔎(x,x) − 𝔎_N(x,x)‖₂,₂) with eigenvalues clamped at zero.
double power2(const Subspace& sub, const Point& x);
/// maxᵢ sqrt|(𝔎(x,x) − 𝔎_N(x,x))ᵢᵢ|.
double power_inf(const Subspace& sub, const Point& x);

enum class PowerKind { kP2, kPInf };

struct PowerSweep {
  Eigen::VectorXd p2;
  Eigen::VectorXd pinf;
};
/// Both power functions at every column of `cloud`, computed blockwise.
PowerSweep power_sweep(const Subspace& sub, const Eigen::MatrixXd& cloud);
double sup_power(const Subspace& sub, const Eigen::MatrixXd& cloud, PowerKind which);

/// P̄₂(x)·‖f‖: bounds ‖E_x(I − Π_N)f‖₂ for every f with ‖f‖ ≤ f_norm.
double pointwise_error_bound(const Subspace& sub, double f_norm, const Point& x);

/// sqrt(Θᵀ 𝕂 Θ) with the un-jittered Grammian of f's own centers.
double rkhs_norm(const KernelFunction& f);
/// ⟨f, g⟩ in the native space of their common kernel.
double rkhs_inner(const KernelFunction& f, const KernelFunction& g);

/// Restriction 𝔯_ℳ = 𝔎|ℳ×ℳ. Arguments farther than `tolerance` from ℳ are
/// rejected.
class RestrictedKernel {
 public:
  RestrictedKernel(OperatorKernel parent, Manifold domain, double tolerance = 1e-9);

  const OperatorKernel& parent() const noexcept { return parent_; }
  const Manifold& domain() const noexcept { return domain_; }
  double tolerance() const noexcept { return tolerance_; }

  Eigen::MatrixXd operator()(const Point& w1, const Point& w2) const;
  /// Grammian of on-manifold centers (n×N), center-major blocks.
  Eigen::MatrixXd grammian(const Eigen::MatrixXd& centers) const;
  void require_on_domain(const Point& w) const;

 private:
  OperatorKernel parent_;
  Manifold domain_;
  double tolerance_;
};

struct ExtensionReport {
  double restriction_extension = 0.0;  // max ‖(T∘ℰ) r − r‖ at quadrature nodes
  double isometry = 0.0;               // |‖f‖_𝔯 − ‖f‖_𝔎|
  double grammian_identity = 0.0;      // max |𝔯-Grammian − 𝔎-Grammian| entry
  double projection_commute = 0.0;     // max ‖Π_N ℰ r − ℰ Π̃_N r‖ at nodes

  double max_deviation() const;
};

/// Numerical check of the restriction/extension identities for a kernel
/// expansion whose centers lie on ℳ, using the sub-centers for the projection
/// identity Π_N ℰ = ℰ Π̃_N.
ExtensionReport restrict_then_extend_check(const OperatorKernel& kernel, const Manifold& manifold,
                                           const KernelFunction& f, const CenterSet& sub_centers,
                                           const Quadrature& nodes);

/// Quadrature approximation of (Lv)(ξ) = ∫ 𝔯(ξ, η) v(η) μ(dη), returned as a
/// globally defined expansion with centers at the quadrature nodes; `samples`
/// is m×Q with column q the value v(η_q).
KernelFunction apply_integral_operator(const OperatorKernel& kernel, const Manifold& manifold,
                                       const Quadrature& nodes, const Eigen::MatrixXd& samples);

/// Smooth bump in chart coordinates, v(u) = amplitude·exp(−‖u − c‖²/width²)
/// with periodic wrapping on periodic chart coordinates. Output component j
/// uses the center shifted by j/(m+1) along the first chart coordinate.
struct Bump {
  Eigen::VectorXd center;
  double width = 0.1;
  double amplitude = 1.0;
};

/// v sampled at the quadrature nodes, m×Q.
Eigen::MatrixXd bump_samples(const Manifold& manifold, const Quadrature& nodes, const Bump& bump, int output_dim);
/// f = ℰ(Lv) for the bump v on `nodes`.
KernelFunction make_bump_target(const OperatorKernel& kernel, const Manifold& manifold, const Bump& bump,
                                int quadrature_count);

/// KernelFunction CSV: kernel spec row, weight row, centers block, coefficient block.
void write_kernel_function_csv(std::ostream& os, const KernelFunction& f);
KernelFunction read_kernel_function_csv(std::istream& is);
/// Header x1..xn,p2,pinf.
void write_power_sweep_csv(std::ostream& os, const Eigen::MatrixXd& cloud, const PowerSweep& sweep);

}  // namespace mvrkhs
