#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvrkhs/approximation.hpp"
#include "mvrkhs/kernel.hpp"

namespace mvrkhs {

/// Feature map Φ: ℝⁿ → ℝᵖ built from terms such as "x1", "x1*x2", "x2^3",
/// "sin(x1)", "cos(x2)" and "1".
class Regressor {
 public:
  Regressor() = default;
  Regressor(std::vector<std::string> terms, int state_dim);

  Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int size() const noexcept { return static_cast<int>(terms_.size()); }
  int state_dim() const noexcept { return state_dim_; }
  const std::vector<std::string>& terms() const noexcept { return terms_; }

 private:
  enum class Op { kIdentity, kSin, kCos };
  struct Factor {
    Op op;
    int index;  // 0-based state index
    int power;
  };
  std::vector<std::string> terms_;
  std::vector<std::vector<Factor>> factors_;
  int state_dim_ = 0;
};

/// Reference command r(t) ∈ ℝᵐ.
class Command {
 public:
  enum class Kind { kConstant, kSinusoid, kPiecewise };

  static Command constant(Eigen::VectorXd value);
  /// rⱼ(t) = offsetⱼ + aⱼ sin(ωⱼ t) + bⱼ cos(ωⱼ t).
  static Command sinusoid(Eigen::VectorXd offset, Eigen::VectorXd sin_amplitude, Eigen::VectorXd cos_amplitude,
                          Eigen::VectorXd frequency);
  /// Piecewise constant: values.col(k) holds on [times[k], times[k+1]);
  /// times[0] must be 0 and times strictly increasing.
  static Command piecewise(std::vector<double> times, Eigen::MatrixXd values);

  Kind kind() const noexcept { return kind_; }
  int dim() const noexcept { return static_cast<int>(a_.rows()); }
  Eigen::VectorXd operator()(double t) const;
  /// Upper bound on sup_t ‖r(t)‖.
  double bound() const;

 private:
  Kind kind_ = Kind::kConstant;
  Eigen::MatrixXd a_;  // shape depends on kind
  std::vector<double> times_;
};

struct PlantSpec {
  Eigen::MatrixXd A;       // n×n
  Eigen::MatrixXd B;       // n×m
  Eigen::MatrixXd Lambda;  // m×m diagonal positive
  Eigen::MatrixXd Theta;   // p×m
  Regressor phi;
  std::optional<KernelFunction> f_true;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  void validate() const;
};

struct ReferenceSpec {
  Eigen::MatrixXd A_ref;
  Eigen::MatrixXd B_ref;
  Command command;
  double x_bar = 0.0;
  Eigen::VectorXd x0;
};

struct GainSpec {
  Eigen::MatrixXd K_x;  // n×m ideal
  Eigen::MatrixXd K_r;  // m×m ideal
  Eigen::MatrixXd Gamma_x;
  Eigen::MatrixXd Gamma_r;
  Eigen::MatrixXd Gamma_theta;
  double gamma_f = 1.0;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd P;
};

struct MatchedReference {
  Eigen::MatrixXd A_ref;
  Eigen::MatrixXd B_ref;
};

/// A_ref = A + BΛK_xᵀ, B_ref = BΛK_rᵀ. Throws NotHurwitz.
MatchedReference build_matched_reference(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                         const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& K_x,
                                         const Eigen::MatrixXd& K_r);

bool is_hurwitz(const Eigen::MatrixXd& A);

/// P with A_refᵀP + PA_ref = −Q from the Kronecker-vectorized system.
Eigen::MatrixXd lyapunov_solve(const Eigen::MatrixXd& A_ref, const Eigen::MatrixXd& Q);

struct MatchingResiduals {
  double state;      // ‖A_ref − A − BΛK_xᵀ‖
  double input;      // ‖B_ref − BΛK_rᵀ‖
  double lyapunov;   // ‖A_refᵀP + PA_ref + Q‖ / ‖Q‖
};
MatchingResiduals matching_residuals(const PlantSpec& plant, const ReferenceSpec& ref, const GainSpec& gains);
/// Throws GateFailure if any residual exceeds 10⁻¹⁰.
void require_matching(const PlantSpec& plant, const ReferenceSpec& ref, const GainSpec& gains);

struct DeadzoneSpec {
  double delta = 0.0;
};

struct DeadzoneValue {
  double sigma;
  double sigma_prime;
};
/// σ(z) = max(0, z − Δ)², σ′(z) = 2·max(0, z − Δ).
DeadzoneValue deadzone_eval(const DeadzoneSpec& dz, double z);

struct AdaptiveState {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd x_ref;
  Eigen::MatrixXd K_x;    // n×m
  Eigen::MatrixXd K_r;    // m×m
  Eigen::MatrixXd Theta;  // p×m
  Eigen::VectorXd c_f;    // mN

  Eigen::VectorXd error() const { return x - x_ref; }
};

struct EstimateRates {
  Eigen::MatrixXd K_x;
  Eigen::MatrixXd K_r;
  Eigen::MatrixXd Theta;
  Eigen::VectorXd c_f;

  double max_abs() const;
};

/// E_x f̂_N = Σᵢ 𝔎(x, ξᵢ) ĉᵢ.
Eigen::VectorXd estimate_value(const Subspace& sub, const Eigen::VectorXd& c_f, const Eigen::VectorXd& x);

/// μ = K̂_xᵀx + K̂_rᵀr − Θ̂ᵀΦ(x) − E_x f̂_N.
Eigen::VectorXd controller(const AdaptiveState& state, const Regressor& phi, const Subspace& sub,
                           const Eigen::VectorXd& r);

EstimateRates learning_rhs(const AdaptiveState& state, const PlantSpec& plant, const GainSpec& gains,
                           const DeadzoneSpec& dz, const Subspace& sub, const Eigen::VectorXd& r);

/// Packed derivative of (x, x_ref, K̂_x, K̂_r, Θ̂, ĉ_f); matrices column-major.
Eigen::VectorXd closed_loop_rhs(const AdaptiveState& state, const PlantSpec& plant, const ReferenceSpec& ref,
                                const GainSpec& gains, const DeadzoneSpec& dz, const Subspace& sub);

Eigen::VectorXd pack(const AdaptiveState& state);
AdaptiveState unpack(const Eigen::VectorXd& packed, const AdaptiveState& shape, double t);

/// Coefficients of Π_N f_true, or zeros when the plant has no f_true.
Eigen::VectorXd projected_truth(const PlantSpec& plant, const Subspace& sub);

struct LyapunovParts {
  double sigma;
  double K_x;
  double K_r;
  double Theta;
  double f;
  double total() const { return sigma + K_x + K_r + Theta + f; }
};
/// σ(eᵀPe) + Σ tr(X̃ᵀΓ⁻¹X̃Λ) + c̃ᵀ𝕂_N(I⊗Λ)c̃/γ_f with c̃ measured against
/// Π_N f_true.
LyapunovParts lyapunov_value(const AdaptiveState& state, const PlantSpec& plant, const GainSpec& gains,
                             const DeadzoneSpec& dz, const Subspace& sub, const Eigen::VectorXd& c_proj);

struct IntegrationSpec {
  double dt = 1e-3;
  double T_final = 10.0;
  int record_every = 1;
  std::uint64_t seed = 0;
};

struct TraceRow {
  double t;
  Eigen::VectorXd x;
  Eigen::VectorXd x_ref;
  double norm_e;
  double ePe;
  double V;
  Eigen::VectorXd mu;
  double sigma_prime;
  // diagnostics, not written to the CSV
  double estimate_rate;  // max |entry| of the estimate derivatives
  double rhs_norm;       // ‖closed-loop RHS‖₂
  Eigen::Vector4d estimate_max;  // max |entry| of K̂_x, K̂_r, Θ̂, ĉ_f
};

struct Trace {
  std::vector<TraceRow> rows;
  int n = 0;
  int m = 0;
  double dt = 0.0;
  Eigen::Vector4d initial_norms = Eigen::Vector4d::Zero();  // Frobenius norms at t = 0
};

void write_trace_csv(std::ostream& os, const Trace& trace);

/// Fixed-step RK4 on closed_loop_rhs. Throws Divergence on a non-finite state
/// and GateFailure if the matching conditions do not hold.
Trace simulate(const PlantSpec& plant, const ReferenceSpec& ref, const GainSpec& gains, const DeadzoneSpec& dz,
               const Subspace& sub, const AdaptiveState& initial, const IntegrationSpec& integration);

/// Default initial state: x = x0, x_ref = x_ref0, all estimates zero.
AdaptiveState zero_estimates(const PlantSpec& plant, const ReferenceSpec& ref, const Subspace& sub,
                             const Eigen::VectorXd& x0);

struct UncertaintyRadii {
  std::optional<double> C_x, C_r, C_theta, C_f;
};

/// R² = 2·(e₀ᵀPe₀ + C_x + C_r + C_Θ + C_f)/λ_min(P): the smallest R with
/// e₀ᵀPe₀ + ΣC < λ_min(P)R², with a 2× safety factor on R². Unset radii default to the initial-estimate-error
/// quadratic forms (C_f against the full f_true).
double uncertainty_radius(const PlantSpec& plant, const GainSpec& gains, const Subspace& sub,
                          const AdaptiveState& initial, const UncertaintyRadii& radii = {});

struct DeadzoneFloor {
  double consistent;  // (λ_max(P)/λ_min(Q))·R·‖PB‖·sup
  double printed;     // R‖PB‖λ_min(Q)λ_min(P)·sup
  double sup_residual;
  double R;
  double R_bar;
};

/// Uniform points in the ball ‖ξ‖ ≤ radius, n×count.
Eigen::MatrixXd ball_probe_cloud(int n, double radius, int count, std::uint64_t seed);

/// Δ̄_N from the sup of ‖E_ξ(I − Π_N)f_true‖ over the probe cloud.
DeadzoneFloor deadzone_floor(const Subspace& sub, const KernelFunction& f_true, const GainSpec& gains,
                             const Eigen::MatrixXd& B, double R, double x_bar, const Eigen::MatrixXd& probe_cloud);

struct TailError {
  double norm_e;
  double ePe;
};
TailError ultimate_error(const Trace& trace, double tail_fraction);

struct DescentReport {
  bool ok = true;
  int checked = 0;
  int violations = 0;
  double worst_excess = 0.0;  // max of ΔV/Δt − tol
  double worst_time = 0.0;
  std::string diagnostic;
};
/// Finite-difference check ΔV/Δt ≤ 10·dt·‖RHS‖ at recorded steps outside the
/// deadzone.
DescentReport check_lyapunov_descent(const Trace& trace, const DeadzoneSpec& dz);

struct FreezeReport {
  int inside = 0;
  int nonzero = 0;
};
/// Recorded steps with eᵀPe ≤ Δ must have exactly zero estimate derivatives.
FreezeReport check_deadzone_freeze(const Trace& trace, const DeadzoneSpec& dz);

}  // namespace mvrkhs
