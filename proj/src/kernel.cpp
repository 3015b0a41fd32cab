#include "mvrkhs/kernel.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "mvrkhs/error.hpp"

namespace mvrkhs {
namespace {

bool is_half_integer_nu(double nu) { return nu == 0.5 || nu == 1.5 || nu == 2.5; }

void check_points(const Point& x1, const Point& x2) {
  if (x1.size() != x2.size()) {
    std::ostringstream os;
    os << "kernel arguments have dimensions " << x1.size() << " and " << x2.size();
    throw DimensionMismatch(os.str());
  }
  if (!x1.allFinite() || !x2.allFinite()) throw InvalidArgument("kernel argument has non-finite entries");
}

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::kMatern: return "matern";
    case KernelFamily::kWendland: return "wendland";
    case KernelFamily::kGaussian: return "gaussian";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "matern") return KernelFamily::kMatern;
  if (name == "wendland") return KernelFamily::kWendland;
  if (name == "gaussian") return KernelFamily::kGaussian;
  throw InvalidArgument("unknown kernel family '" + name + "'");
}

ScalarKernel::ScalarKernel(KernelFamily family, double smoothness, double lengthscale)
    : family_(family), smoothness_(smoothness), lengthscale_(lengthscale) {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw InvalidArgument("kernel lengthscale must be positive and finite");
  }
  if (family == KernelFamily::kMatern && !is_half_integer_nu(smoothness)) {
    throw InvalidArgument("Matern nu must be one of 0.5, 1.5, 2.5");
  }
  if (family == KernelFamily::kWendland && smoothness != 1.0) {
    throw InvalidArgument("only the Wendland function phi_{3,1} (index 1) is supported");
  }
}

double ScalarKernel::radial(double distance) const noexcept {
  const double r = distance / lengthscale_;
  switch (family_) {
    case KernelFamily::kMatern:
      if (smoothness_ == 0.5) return std::exp(-r);
      if (smoothness_ == 1.5) {
        const double a = std::sqrt(3.0) * r;
        return (1.0 + a) * std::exp(-a);
      } else {
        const double a = std::sqrt(5.0) * r;
        return (1.0 + a + a * a / 3.0) * std::exp(-a);
      }
    case KernelFamily::kWendland: {
      if (r >= 1.0) return 0.0;
      const double t = 1.0 - r;
      const double t2 = t * t;
      return t2 * t2 * (4.0 * r + 1.0);
    }
    case KernelFamily::kGaussian:
      return std::exp(-0.5 * r * r);
  }
  return 0.0;
}

std::optional<double> ScalarKernel::decay_order(int ambient_dim) const {
  switch (family_) {
    case KernelFamily::kMatern: return smoothness_ + 0.5 * ambient_dim;
    case KernelFamily::kWendland: return 0.5 * ambient_dim + 1.5;
    case KernelFamily::kGaussian: return std::nullopt;
  }
  return std::nullopt;
}

void ScalarKernel::check_ambient_dim(int ambient_dim) const {
  if (ambient_dim < 1) throw InvalidArgument("ambient dimension must be positive");
  if (family_ == KernelFamily::kWendland && ambient_dim > 3) {
    throw InvalidArgument("Wendland phi_{3,1} is only positive definite for n <= 3");
  }
  if (const auto s = decay_order(ambient_dim); s && !(*s > 0.5 * ambient_dim)) {
    throw InvalidArgument("kernel decay order does not exceed n/2");
  }
}

double eval_scalar(const ScalarKernel& k, const Point& x1, const Point& x2) {
  check_points(x1, x2);
  return k.radial((x1 - x2).norm());
}

OperatorKernel::OperatorKernel(ScalarKernel scalar, Eigen::MatrixXd weight)
    : scalar_(scalar), weight_(std::move(weight)) {
  if (weight_.rows() < 1 || weight_.rows() != weight_.cols()) {
    throw DimensionMismatch("operator kernel weight must be a nonempty square matrix");
  }
  if (!weight_.allFinite()) throw InvalidArgument("operator kernel weight has non-finite entries");
  const double scale = std::max(1.0, weight_.cwiseAbs().maxCoeff());
  if ((weight_ - weight_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidArgument("operator kernel weight must be symmetric");
  }
  weight_ = 0.5 * (weight_ + weight_.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(weight_, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw InvalidArgument("operator kernel weight must be positive semidefinite");
  }
  identity_weight_ = weight_.isIdentity(0.0);
}

Eigen::MatrixXd OperatorKernel::operator()(const Point& x1, const Point& x2) const {
  return weight_ * eval_scalar(scalar_, x1, x2);
}

Eigen::MatrixXd eval_operator(const OperatorKernel& kernel, const Point& x1, const Point& x2) {
  return kernel(x1, x2);
}

Eigen::MatrixXd scalar_gram(const ScalarKernel& k, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows()) throw DimensionMismatch("scalar_gram: point sets differ in dimension");
  Eigen::MatrixXd out(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.cols(); ++i) out(i, j) = k.radial((a.col(i) - b.col(j)).norm());
  }
  return out;
}

double diagonal_bound(const OperatorKernel& kernel) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kernel.weight(), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().cwiseAbs().maxCoeff()));
}

double psd_check(const OperatorKernel& kernel, const Eigen::MatrixXd& centers,
                 const Eigen::MatrixXd& directions, const Eigen::VectorXd& coeffs) {
  const Eigen::Index n_centers = centers.cols();
  if (n_centers < 1) throw InvalidArgument("psd_check needs at least one center");
  if (directions.cols() != n_centers || coeffs.size() != n_centers) {
    throw DimensionMismatch("psd_check: centers, directions and coefficients differ in length");
  }
  if (directions.rows() != kernel.output_dim()) {
    throw DimensionMismatch("psd_check: direction length differs from kernel output dimension");
  }
  // (𝔎(ξᵢ,ξⱼ)yᵢ, yⱼ) = k(ξᵢ,ξⱼ)·yⱼᵀ B yᵢ
  const Eigen::MatrixXd weighted = kernel.weight() * directions;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n_centers; ++i) {
    for (Eigen::Index j = 0; j < n_centers; ++j) {
      const double k = eval_scalar(kernel.scalar(), centers.col(i), centers.col(j));
      total += coeffs[i] * coeffs[j] * k * directions.col(j).dot(weighted.col(i));
    }
  }
  return total;
}

}  // namespace mvrkhs
