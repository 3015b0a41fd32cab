#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>

namespace mvrkhs {

/// A point of the state space ℝⁿ.
using Point = Eigen::VectorXd;

enum class KernelFamily { kMatern, kWendland, kGaussian };

std::string to_string(KernelFamily family);
KernelFamily parse_kernel_family(const std::string& name);

/// Radial scalar kernel normalized so that k(x, x) = 1.
///
/// Supported members:
///   - Matérn with ν ∈ {1/2, 3/2, 5/2} (closed forms), decay order s = ν + n/2;
///   - Wendland φ_{3,1}(r) = (1 - r)⁴₊ (4r + 1), positive definite for n ≤ 3,
///     decay order s = n/2 + 3/2;
///   - Gaussian exp(-r²/2), which has no finite algebraic decay order.
/// Here r = ‖x₁ - x₂‖ / lengthscale.
class ScalarKernel {
 public:
  ScalarKernel(KernelFamily family, double smoothness, double lengthscale);

  static ScalarKernel matern(double nu, double lengthscale) {
    return {KernelFamily::kMatern, nu, lengthscale};
  }
  static ScalarKernel wendland(double lengthscale) { return {KernelFamily::kWendland, 1.0, lengthscale}; }
  static ScalarKernel gaussian(double lengthscale) { return {KernelFamily::kGaussian, 0.0, lengthscale}; }

  KernelFamily family() const noexcept { return family_; }
  /// Matérn ν, or the Wendland smoothness index k (always 1).
  double smoothness() const noexcept { return smoothness_; }
  double lengthscale() const noexcept { return lengthscale_; }

  /// Profile as a function of the unscaled distance d = ‖x₁ - x₂‖ ≥ 0.
  double radial(double distance) const noexcept;

  /// Sobolev/Fourier decay exponent s in ambient dimension n; nullopt for the
  /// Gaussian.
  std::optional<double> decay_order(int ambient_dim) const;

  /// Throws unless the kernel is admissible in ℝⁿ (s > n/2, Wendland n ≤ 3).
  void check_ambient_dim(int ambient_dim) const;

 private:
  KernelFamily family_;
  double smoothness_;
  double lengthscale_;
};

/// k(x₁, x₂). Throws on dimension mismatch or non-finite input.
double eval_scalar(const ScalarKernel& k, const Point& x1, const Point& x2);

/// Separable operator-valued kernel 𝔎(x₁, x₂) = B·k(x₁, x₂) with B symmetric
/// positive semidefinite (B = I_m for the diagonal kernel k·I_m).
class OperatorKernel {
 public:
  OperatorKernel(ScalarKernel scalar, Eigen::MatrixXd weight);

  static OperatorKernel diagonal(const ScalarKernel& scalar, int output_dim) {
    return {scalar, Eigen::MatrixXd::Identity(output_dim, output_dim)};
  }

  const ScalarKernel& scalar() const noexcept { return scalar_; }
  const Eigen::MatrixXd& weight() const noexcept { return weight_; }
  int output_dim() const noexcept { return static_cast<int>(weight_.rows()); }
  bool is_diagonal() const noexcept { return identity_weight_; }

  /// B·k(x₁, x₂), m×m.
  Eigen::MatrixXd operator()(const Point& x1, const Point& x2) const;

  /// Scalar factor k(x₁, x₂) without input validation; hot loops only.
  double scalar_unchecked(const Eigen::Ref<const Eigen::VectorXd>& x1,
                          const Eigen::Ref<const Eigen::VectorXd>& x2) const noexcept {
    return scalar_.radial((x1 - x2).norm());
  }

 private:
  ScalarKernel scalar_;
  Eigen::MatrixXd weight_;
  bool identity_weight_;
};

Eigen::MatrixXd eval_operator(const OperatorKernel& kernel, const Point& x1, const Point& x2);

/// Scalar kernel matrix k(aᵢ, bⱼ) for point columns of a (n×P) and b (n×Q).
Eigen::MatrixXd scalar_gram(const ScalarKernel& k, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// k̄ = sqrt(‖B‖₂,₂); the diagonal satisfies ‖𝔎(x, x)‖₂,₂ ≤ k̄².
double diagonal_bound(const OperatorKernel& kernel);

/// Σᵢⱼ αᵢαⱼ (𝔎(ξᵢ, ξⱼ) yᵢ, yⱼ). Centers are columns of `centers` (n×N),
/// directions columns of `directions` (m×N).
double psd_check(const OperatorKernel& kernel, const Eigen::MatrixXd& centers,
                 const Eigen::MatrixXd& directions, const Eigen::VectorXd& coeffs);

}  // namespace mvrkhs
