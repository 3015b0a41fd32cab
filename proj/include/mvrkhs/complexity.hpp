#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvrkhs/approximation.hpp"
#include "mvrkhs/geometry.hpp"
#include "mvrkhs/kernel.hpp"

namespace mvrkhs {

struct ReducedSmoothness {
  double value;
  /// s̄ > ℓ/2: the restricted space embeds in continuous functions.
  bool embeds_continuously;
  std::vector<std::string> warnings;
};

/// s̄ = s − (n − ℓ)/2. Requires 1 ≤ ℓ ≤ n and s > 0; s ≤ n/2 and s̄ ≤ ℓ/2 are
/// reported as warnings rather than errors.
ReducedSmoothness reduced_smoothness(double s, int n, int ell);

/// A measured (ε₀, N₀) pair anchoring a scaling law.
struct Calibration {
  double epsilon = 1.0;
  double count = 1.0;
};

/// N₀·(ε₀/ε)^(ℓ/s̄).
double predict_center_count(double epsilon, int ell, double sbar, const Calibration& cal = {});
/// N₀·(ε₀/ε)^(n/s), the full-dimensional cube count.
double predict_cube_center_count(double epsilon, int n, double s, const Calibration& cal = {});

struct RateRow {
  int count = 0;
  double fill = 0.0;
  double sup_err = 0.0;
  double sup_power = 0.0;
  // diagnostics kept in the sidecar
  double separation = 0.0;
  double sup_err_off = 0.0;    // off-manifold probes
  double sup_power_off = 0.0;
  double rkhs_residual = 0.0;  // ‖(I − Π_N)f‖
  double jitter = 0.0;
};

struct RateTable {
  std::vector<RateRow> rows;
  std::string kernel;
  std::string manifold;
  std::string target;
  double s = 0.0;
  double sbar = 0.0;
  int ell = 0;
  int n = 0;
  double target_norm = 0.0;
};

struct StudyOptions {
  /// On-manifold evaluation cloud size (chart grid count); 0 picks 16·max N,
  /// at least 4096.
  int cloud_count = 0;
  /// Every `probe_stride`-th cloud point is displaced ±probe_offset·diam along
  /// each normal direction.
  int probe_stride = 8;
  double probe_offset = 0.1;
  int candidate_factor = 50;
  std::string target_id = "target";
};

/// Projects the target onto nested farthest-point subspaces of each size in
/// `counts` and records fill distance and sup errors.
RateTable convergence_study(const OperatorKernel& kernel, const Manifold& manifold, const KernelFunction& target,
                            std::span<const int> counts, const StudyOptions& options = {});

enum class RateX { kFill, kCount };
enum class RateY { kSupErr, kSupPower };

struct FitResult {
  double slope;
  double r2;
  int used_rows;
};

/// Rows whose y value is above the 10⁻¹⁰ floor.
constexpr double kMachineFloor = 1e-10;
int usable_rows(const RateTable& table, RateY y);

/// Least-squares slope of log y against log x. Rows with y < 10⁻¹⁰ are
/// dropped; fewer than three remaining rows is an error.
FitResult fit_order(const RateTable& table, RateX x, RateY y);
FitResult fit_order(std::span<const double> xs, std::span<const double> ys);

struct CurseRow {
  int n;
  double cube_count;
  double manifold_count;
  double ratio;
};

/// Cube prediction ε^(−n/s) against the manifold prediction ε^(−ℓ/s̄) for
/// each ambient dimension, both anchored at the same calibration point.
std::vector<CurseRow> curse_comparison(double epsilon, double s, int ell, double sbar, std::span<const int> dims,
                                       const Calibration& cal = {});

/// Header N,h,sup_err,sup_power.
void write_rate_csv(std::ostream& os, const RateTable& table);
/// key=value metadata followed by the full diagnostic rows.
void write_rate_sidecar(std::ostream& os, const RateTable& table);
/// Two columns: log10 x, log10 y.
void write_loglog(std::ostream& os, const RateTable& table, RateX x, RateY y);
void write_curse_csv(std::ostream& os, std::span<const CurseRow> rows);

}  // namespace mvrkhs
