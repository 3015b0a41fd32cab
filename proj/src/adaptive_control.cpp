#include "mvrkhs/adaptive_control.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "mvrkhs/csv.hpp"
#include "mvrkhs/error.hpp"
#include "mvrkhs/random.hpp"

namespace mvrkhs {
namespace {

std::string shape_of(const Eigen::MatrixXd& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

void require_shape(const Eigen::MatrixXd& a, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (a.rows() != rows || a.cols() != cols) {
    throw DimensionMismatch(std::string(name) + " must be " + std::to_string(rows) + "x" + std::to_string(cols) +
                            ", got " + shape_of(a));
  }
}

double lambda_min_sym(const Eigen::MatrixXd& a) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

double lambda_max_sym(const Eigen::MatrixXd& a) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

double spectral_norm(const Eigen::MatrixXd& a) { return std::sqrt(std::max(0.0, lambda_max_sym(a.transpose() * a))); }

void require_spd(const Eigen::MatrixXd& a, const char* name) {
  if (a.rows() != a.cols() || (a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + a.cwiseAbs().maxCoeff()) ||
      !(lambda_min_sym(a) > 0.0)) {
    throw InvalidArgument(std::string(name) + " must be symmetric positive definite");
  }
}

Eigen::VectorXd vec(const Eigen::MatrixXd& a) { return Eigen::Map<const Eigen::VectorXd>(a.data(), a.size()); }

/// Σᵢ 𝔎(ξᵢ, x) y stacked center-major, then 𝕂_N⁻¹ applied.
Eigen::VectorXd projected_section(const Subspace& sub, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (sub.size() == 0) return Eigen::VectorXd(0);
  const Eigen::VectorXd k = sub.section_values(x);
  const Eigen::VectorXd wy = sub.kernel().weight() * y;
  const Eigen::Index m = wy.size();
  Eigen::VectorXd rhs(sub.dim());
  for (Eigen::Index i = 0; i < sub.size(); ++i) rhs.segment(i * m, m) = k[i] * wy;
  return sub.solve(rhs);
}

/// c̃ᵀ 𝕂_N (I⊗Λ) c̃
double weighted_coefficient_form(const Subspace& sub, const Eigen::VectorXd& c, const Eigen::MatrixXd& Lambda) {
  if (sub.size() == 0) return 0.0;
  const Eigen::Index m = Lambda.rows();
  Eigen::VectorXd lc(c.size());
  for (Eigen::Index i = 0; i < sub.size(); ++i) lc.segment(i * m, m) = Lambda * c.segment(i * m, m);
  return c.dot(sub.grammian() * lc);
}

double trace_form(const Eigen::MatrixXd& err, const Eigen::MatrixXd& gamma_inv, const Eigen::MatrixXd& Lambda) {
  return (err.transpose() * gamma_inv * err * Lambda).trace();
}

}  // namespace

// ---------------------------------------------------------------------------
// Regressor

Regressor::Regressor(std::vector<std::string> terms, int state_dim) : terms_(std::move(terms)), state_dim_(state_dim) {
  if (state_dim < 1) throw InvalidArgument("regressor: state dimension must be >= 1");
  auto parse_index = [&](const std::string& s, const std::string& term) {
    if (s.size() < 2 || s[0] != 'x') throw InvalidArgument("regressor: bad variable in term '" + term + "'");
    int idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoi(s.substr(1), &used);
      if (used != s.size() - 1) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw InvalidArgument("regressor: bad variable in term '" + term + "'");
    }
    if (idx < 1 || idx > state_dim) {
      throw InvalidArgument("regressor: term '" + term + "' refers to a state outside 1.." + std::to_string(state_dim));
    }
    return idx - 1;
  };
  for (const auto& term : terms_) {
    std::vector<Factor> factors;
    std::stringstream ss(term);
    std::string piece;
    while (std::getline(ss, piece, '*')) {
      piece.erase(std::remove_if(piece.begin(), piece.end(), ::isspace), piece.end());
      if (piece == "1") continue;
      int power = 1;
      if (const auto caret = piece.find('^'); caret != std::string::npos) {
        try {
          power = std::stoi(piece.substr(caret + 1));
        } catch (const std::exception&) {
          throw InvalidArgument("regressor: bad exponent in term '" + term + "'");
        }
        if (power < 0) throw InvalidArgument("regressor: negative exponent in term '" + term + "'");
        piece = piece.substr(0, caret);
      }
      Op op = Op::kIdentity;
      if (piece.starts_with("sin(") || piece.starts_with("cos(")) {
        if (piece.back() != ')') throw InvalidArgument("regressor: unbalanced parentheses in '" + term + "'");
        op = piece[0] == 's' ? Op::kSin : Op::kCos;
        piece = piece.substr(4, piece.size() - 5);
      }
      factors.push_back({op, parse_index(piece, term), power});
    }
    factors_.push_back(std::move(factors));
  }
}

Eigen::VectorXd Regressor::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != state_dim_) throw DimensionMismatch("regressor: state has wrong dimension");
  Eigen::VectorXd out(size());
  for (int j = 0; j < size(); ++j) {
    double value = 1.0;
    for (const auto& f : factors_[j]) {
      double base = x[f.index];
      if (f.op == Op::kSin) base = std::sin(base);
      if (f.op == Op::kCos) base = std::cos(base);
      value *= std::pow(base, f.power);
    }
    out[j] = value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Command

Command Command::constant(Eigen::VectorXd value) {
  Command c;
  c.kind_ = Kind::kConstant;
  c.a_ = value;
  return c;
}

Command Command::sinusoid(Eigen::VectorXd offset, Eigen::VectorXd sin_amplitude, Eigen::VectorXd cos_amplitude,
                          Eigen::VectorXd frequency) {
  const auto m = offset.size();
  if (sin_amplitude.size() != m || cos_amplitude.size() != m || frequency.size() != m) {
    throw DimensionMismatch("sinusoid command: all channel vectors must have the same length");
  }
  Command c;
  c.kind_ = Kind::kSinusoid;
  c.a_.resize(m, 4);
  c.a_ << offset, sin_amplitude, cos_amplitude, frequency;
  return c;
}

Command Command::piecewise(std::vector<double> times, Eigen::MatrixXd values) {
  if (times.empty() || times.size() != static_cast<std::size_t>(values.cols())) {
    throw DimensionMismatch("piecewise command: need one value column per breakpoint");
  }
  if (times[0] != 0.0) throw InvalidArgument("piecewise command: first breakpoint must be 0");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw InvalidArgument("piecewise command: breakpoints must increase");
  }
  Command c;
  c.kind_ = Kind::kPiecewise;
  c.a_ = std::move(values);
  c.times_ = std::move(times);
  return c;
}

Eigen::VectorXd Command::operator()(double t) const {
  switch (kind_) {
    case Kind::kConstant:
      return a_.col(0);
    case Kind::kSinusoid: {
      Eigen::VectorXd r(a_.rows());
      for (Eigen::Index j = 0; j < a_.rows(); ++j) {
        const double w = a_(j, 3) * t;
        r[j] = a_(j, 0) + a_(j, 1) * std::sin(w) + a_(j, 2) * std::cos(w);
      }
      return r;
    }
    case Kind::kPiecewise: {
      const auto it = std::upper_bound(times_.begin(), times_.end(), t);
      const auto k = std::max<std::ptrdiff_t>(0, (it - times_.begin()) - 1);
      return a_.col(k);
    }
  }
  return {};
}

double Command::bound() const {
  switch (kind_) {
    case Kind::kConstant:
      return a_.col(0).norm();
    case Kind::kSinusoid: {
      // |a sin + b cos| ≤ sqrt(a² + b²)
      Eigen::VectorXd peak(a_.rows());
      for (Eigen::Index j = 0; j < a_.rows(); ++j) {
        peak[j] = std::abs(a_(j, 0)) + std::hypot(a_(j, 1), a_(j, 2));
      }
      return peak.norm();
    }
    case Kind::kPiecewise:
      return a_.colwise().norm().maxCoeff();
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Plant and reference

void PlantSpec::validate() const {
  const auto nn = A.rows();
  require_shape(A, nn, nn, "A");
  if (B.rows() != nn) throw DimensionMismatch("B must have n rows, got " + shape_of(B));
  const auto mm = B.cols();
  require_shape(Lambda, mm, mm, "Lambda");
  if (!Lambda.isDiagonal() || !(Lambda.diagonal().minCoeff() > 0.0)) {
    throw InvalidArgument("Lambda must be diagonal positive definite");
  }
  require_shape(Theta, phi.size(), mm, "Theta");
  if (phi.state_dim() != nn && phi.size() > 0) throw DimensionMismatch("regressor state dimension differs from n");
  if (f_true) {
    if (f_true->output_dim() != mm) throw DimensionMismatch("f_true output dimension differs from m");
    if (f_true->ambient_dim() != nn) throw DimensionMismatch("f_true ambient dimension differs from n");
  }
}

bool is_hurwitz(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() == 0) return false;
  Eigen::EigenSolver<Eigen::MatrixXd> eig(A, false);
  return eig.eigenvalues().real().maxCoeff() < 0.0;
}

MatchedReference build_matched_reference(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                         const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& K_x,
                                         const Eigen::MatrixXd& K_r) {
  const auto n = A.rows();
  const auto m = B.cols();
  require_shape(A, n, n, "A");
  require_shape(B, n, m, "B");
  require_shape(Lambda, m, m, "Lambda");
  require_shape(K_x, n, m, "K_x");
  require_shape(K_r, m, m, "K_r");
  MatchedReference out{A + B * Lambda * K_x.transpose(), B * Lambda * K_r.transpose()};
  if (!is_hurwitz(out.A_ref)) {
    Eigen::EigenSolver<Eigen::MatrixXd> eig(out.A_ref, false);
    std::ostringstream os;
    os << "matched reference matrix is not Hurwitz (max real eigenvalue " << eig.eigenvalues().real().maxCoeff()
       << ")";
    throw NotHurwitz(os.str());
  }
  return out;
}

Eigen::MatrixXd lyapunov_solve(const Eigen::MatrixXd& A_ref, const Eigen::MatrixXd& Q) {
  const auto n = A_ref.rows();
  require_shape(A_ref, n, n, "A_ref");
  require_shape(Q, n, n, "Q");
  if (!is_hurwitz(A_ref)) throw NotHurwitz("lyapunov_solve: A_ref is not Hurwitz");
  require_spd(Q, "Q");
  // vec(AᵀP + PA) = (I ⊗ Aᵀ + Aᵀ ⊗ I) vec P
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd At = A_ref.transpose();
  Eigen::MatrixXd L(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) L.block(i * n, j * n, n, n) = I(i, j) * At + At(i, j) * I;
  }
  const Eigen::VectorXd p = L.partialPivLu().solve(-vec(Q));
  Eigen::MatrixXd P = Eigen::Map<const Eigen::MatrixXd>(p.data(), n, n);
  P = 0.5 * (P + P.transpose());
  const double residual = (At * P + P * A_ref + Q).norm();
  if (!(residual <= 1e-10 * Q.norm())) {
    std::ostringstream os;
    os << "lyapunov_solve: residual " << residual << " exceeds 1e-10*|Q|";
    throw GateFailure(os.str());
  }
  return P;
}

MatchingResiduals matching_residuals(const PlantSpec& plant, const ReferenceSpec& ref, const GainSpec& gains) {
  const Eigen::MatrixXd BL = plant.B * plant.Lambda;
  MatchingResiduals r;
  r.state = (ref.A_ref - plant.A - BL * gains.K_x.transpose()).norm();
  r.input = (ref.B_ref - BL * gains.K_r.transpose()).norm();
  r.lyapunov = (ref.A_ref.transpose() * gains.P + gains.P * ref.A_ref + gains.Q).norm() / gains.Q.norm();
  return r;
}

void require_matching(const PlantSpec& plant, const ReferenceSpec& ref, const GainSpec& gains) {
  plant.validate();
  const auto n = plant.n();
  const auto m = plant.m();
  require_shape(ref.A_ref, n, n, "A_ref");
  require_shape(ref.B_ref, n, m, "B_ref");
  require_shape(gains.K_x, n, m, "K_x");
  require_shape(gains.K_r, m, m, "K_r");
  require_shape(gains.P, n, n, "P");
  require_shape(gains.Q, n, n, "Q");
  const auto r = matching_residuals(plant, ref, gains);
  if (r.state > 1e-10 || r.input > 1e-10 || r.lyapunov > 1e-10) {
    std::ostringstream os;
    os << "matching conditions violated: |A_ref - A - B Lambda K_x^T| = " << r.state
       << ", |B_ref - B Lambda K_r^T| = " << r.input << ", relative Lyapunov residual = " << r.lyapunov;
    throw GateFailure(os.str());
  }
}

// ---------------------------------------------------------------------------
// Deadzone, controller, learning laws

DeadzoneValue deadzone_eval(const DeadzoneSpec& dz, double z) {
  if (!(z >= 0.0)) throw InvalidArgument("deadzone_eval: argument must be nonnegative");
  const double excess = std::max(0.0, z - dz.delta);
  return {excess * excess, 2.0 * excess};
}

double EstimateRates::max_abs() const {
  double out = 0.0;
  for (const Eigen::MatrixXd* a : {&K_x, &K_r, &Theta}) {
    if (a->size()) out = std::max(out, a->cwiseAbs().maxCoeff());
  }
  if (c_f.size()) out = std::max(out, c_f.cwiseAbs().maxCoeff());
  return out;
}

Eigen::VectorXd estimate_value(const Subspace& sub, const Eigen::VectorXd& c_f, const Eigen::VectorXd& x) {
  const Eigen::Index m = sub.kernel().output_dim();
  if (sub.size() == 0) return Eigen::VectorXd::Zero(m);
  const Eigen::VectorXd k = sub.section_values(x);
  const Eigen::Map<const Eigen::MatrixXd> coeffs(c_f.data(), m, sub.size());
  return sub.kernel().weight() * (coeffs * k);
}

Eigen::VectorXd controller(const AdaptiveState& state, const Regressor& phi, const Subspace& sub,
                           const Eigen::VectorXd& r) {
  Eigen::VectorXd mu = state.K_x.transpose() * state.x + state.K_r.transpose() * r;
  if (phi.size() > 0) mu -= state.Theta.transpose() * phi(state.x);
  mu -= estimate_value(sub, state.c_f, state.x);
  return mu;
}

EstimateRates learning_rhs(const AdaptiveState& state, const PlantSpec& plant, const GainSpec& gains,
                           const DeadzoneSpec& dz, const Subspace& sub, const Eigen::VectorXd& r) {
  const Eigen::VectorXd e = state.error();
  const double s = deadzone_eval(dz, e.dot(gains.P * e)).sigma_prime;
  const Eigen::RowVectorXd ePB = e.transpose() * gains.P * plant.B;
  EstimateRates d;
  d.K_x = -s * gains.Gamma_x * state.x * ePB;
  d.K_r = -s * gains.Gamma_r * r * ePB;
  if (plant.phi.size() > 0) {
    d.Theta = s * gains.Gamma_theta * plant.phi(state.x) * ePB;
  } else {
    d.Theta = Eigen::MatrixXd::Zero(0, plant.m());
  }
  if (s == 0.0) {
    d.c_f = Eigen::VectorXd::Zero(sub.dim());
  } else {
    d.c_f = s * gains.gamma_f * projected_section(sub, state.x, ePB.transpose());
  }
  return d;
}

Eigen::VectorXd pack(const AdaptiveState& s) {
  Eigen::VectorXd out(s.x.size() + s.x_ref.size() + s.K_x.size() + s.K_r.size() + s.Theta.size() + s.c_f.size());
  out << s.x, s.x_ref, vec(s.K_x), vec(s.K_r), vec(s.Theta), s.c_f;
  return out;
}

AdaptiveState unpack(const Eigen::VectorXd& p, const AdaptiveState& shape, double t) {
  AdaptiveState s;
  s.t = t;
  Eigen::Index off = 0;
  auto take = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd out = Eigen::Map<const Eigen::MatrixXd>(p.data() + off, rows, cols);
    off += rows * cols;
    return out;
  };
  s.x = take(shape.x.size(), 1);
  s.x_ref = take(shape.x_ref.size(), 1);
  s.K_x = take(shape.K_x.rows(), shape.K_x.cols());
  s.K_r = take(shape.K_r.rows(), shape.K_r.cols());
  s.Theta = take(shape.Theta.rows(), shape.Theta.cols());
  s.c_f = take(shape.c_f.size(), 1);
  if (off != p.size()) throw DimensionMismatch("unpack: packed state has wrong length");
  return s;
}

namespace {

Eigen::VectorXd assemble_rhs(const AdaptiveState& state, const PlantSpec& plant, const ReferenceSpec& ref,
                             const GainSpec& gains, const DeadzoneSpec& dz, const Subspace& sub,
                             Eigen::VectorXd* mu_out, EstimateRates* rates_out) {
  const Eigen::VectorXd r = ref.command(state.t);
  const Eigen::VectorXd mu = controller(state, plant.phi, sub, r);
  Eigen::VectorXd drive = mu;
  if (plant.phi.size() > 0) drive += plant.Theta.transpose() * plant.phi(state.x);
  if (plant.f_true) drive += (*plant.f_true)(state.x);
  AdaptiveState d;
  d.x = plant.A * state.x + plant.B * (plant.Lambda * drive);
  d.x_ref = ref.A_ref * state.x_ref + ref.B_ref * r;
  EstimateRates rates = learning_rhs(state, plant, gains, dz, sub, r);
  d.K_x = rates.K_x;
  d.K_r = rates.K_r;
  d.Theta = rates.Theta;
  d.c_f = rates.c_f;
  if (mu_out) *mu_out = mu;
  if (rates_out) *rates_out = std::move(rates);
  return pack(d);
}

}  // namespace

Eigen::VectorXd closed_loop_rhs(const AdaptiveState& state, const PlantSpec& plant, const ReferenceSpec& ref,
                                const GainSpec& gains, const DeadzoneSpec& dz, const Subspace& sub) {
  return assemble_rhs(state, plant, ref, gains, dz, sub, nullptr, nullptr);
}

Eigen::VectorXd projected_truth(const PlantSpec& plant, const Subspace& sub) {
  if (!plant.f_true || sub.size() == 0) return Eigen::VectorXd::Zero(sub.dim());
  return project_function(sub, *plant.f_true).coeffs();
}

LyapunovParts lyapunov_value(const AdaptiveState& state, const PlantSpec& plant, const GainSpec& gains,
                             const DeadzoneSpec& dz, const Subspace& sub, const Eigen::VectorXd& c_proj) {
  const Eigen::VectorXd e = state.error();
  LyapunovParts v{};
  v.sigma = deadzone_eval(dz, e.dot(gains.P * e)).sigma;
  v.K_x = trace_form(state.K_x - gains.K_x, gains.Gamma_x.inverse(), plant.Lambda);
  v.K_r = trace_form(state.K_r - gains.K_r, gains.Gamma_r.inverse(), plant.Lambda);
  v.Theta = plant.phi.size() ? trace_form(state.Theta - plant.Theta, gains.Gamma_theta.inverse(), plant.Lambda) : 0.0;
  v.f = weighted_coefficient_form(sub, state.c_f - c_proj, plant.Lambda) / gains.gamma_f;
  return v;
}

AdaptiveState zero_estimates(const PlantSpec& plant, const ReferenceSpec& ref, const Subspace& sub,
                             const Eigen::VectorXd& x0) {
  AdaptiveState s;
  s.x = x0;
  s.x_ref = ref.x0;
  s.K_x = Eigen::MatrixXd::Zero(plant.n(), plant.m());
  s.K_r = Eigen::MatrixXd::Zero(plant.m(), plant.m());
  s.Theta = Eigen::MatrixXd::Zero(plant.phi.size(), plant.m());
  s.c_f = Eigen::VectorXd::Zero(sub.dim());
  return s;
}

// ---------------------------------------------------------------------------
// Simulation

void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << 't';
  for (int i = 0; i < trace.n; ++i) os << ",x" << i + 1;
  for (int i = 0; i < trace.n; ++i) os << ",xref" << i + 1;
  os << ",norm_e,ePe,V";
  for (int j = 0; j < trace.m; ++j) os << ",mu" << j + 1;
  os << ",sigma_prime\n";
  for (const auto& row : trace.rows) {
    os << csv::number(row.t) << ',';
    csv::write_row(os, row.x);
    os << ',';
    csv::write_row(os, row.x_ref);
    os << ',' << csv::number(row.norm_e) << ',' << csv::number(row.ePe) << ',' << csv::number(row.V) << ',';
    csv::write_row(os, row.mu);
    os << ',' << csv::number(row.sigma_prime) << '\n';
  }
}

Trace simulate(const PlantSpec& plant, const ReferenceSpec& ref, const GainSpec& gains, const DeadzoneSpec& dz,
               const Subspace& sub, const AdaptiveState& initial, const IntegrationSpec& integration) {
  if (!(integration.dt > 0.0)) throw InvalidArgument("simulate: dt must be positive");
  if (!(integration.T_final >= 10.0 * integration.dt)) throw InvalidArgument("simulate: T_final must be >= 10*dt");
  if (integration.record_every < 1) throw InvalidArgument("simulate: record_every must be >= 1");
  if (!(dz.delta >= 0.0)) throw InvalidArgument("simulate: deadzone size must be nonnegative");
  require_matching(plant, ref, gains);
  require_spd(gains.Gamma_x, "Gamma_x");
  require_spd(gains.Gamma_r, "Gamma_r");
  if (plant.phi.size() > 0) require_spd(gains.Gamma_theta, "Gamma_theta");
  if (!(gains.gamma_f > 0.0)) throw InvalidArgument("gamma_f must be positive");
  if (ref.command.dim() != plant.m()) throw DimensionMismatch("command dimension differs from m");
  if (sub.size() > 0 && (sub.ambient_dim() != plant.n() || sub.kernel().output_dim() != plant.m())) {
    throw DimensionMismatch("subspace does not map R^n to R^m");
  }
  if (initial.c_f.size() != sub.dim()) throw DimensionMismatch("initial f estimate has wrong length");

  const Eigen::VectorXd c_proj = projected_truth(plant, sub);
  const auto steps = static_cast<long>(std::llround(integration.T_final / integration.dt));
  const double dt = integration.dt;

  Trace trace;
  trace.n = plant.n();
  trace.m = plant.m();
  trace.dt = dt;
  trace.initial_norms << initial.K_x.norm(), initial.K_r.norm(), initial.Theta.norm(), initial.c_f.norm();

  auto record = [&](const AdaptiveState& s) {
    Eigen::VectorXd mu;
    EstimateRates rates;
    const Eigen::VectorXd rhs = assemble_rhs(s, plant, ref, gains, dz, sub, &mu, &rates);
    const Eigen::VectorXd e = s.error();
    TraceRow row;
    row.t = s.t;
    row.x = s.x;
    row.x_ref = s.x_ref;
    row.norm_e = e.norm();
    row.ePe = e.dot(gains.P * e);
    row.V = lyapunov_value(s, plant, gains, dz, sub, c_proj).total();
    row.mu = mu;
    row.sigma_prime = deadzone_eval(dz, row.ePe).sigma_prime;
    row.estimate_rate = rates.max_abs();
    row.rhs_norm = rhs.norm();
    auto max_abs = [](const auto& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; };
    row.estimate_max << max_abs(s.K_x), max_abs(s.K_r), max_abs(s.Theta), max_abs(s.c_f);
    trace.rows.push_back(std::move(row));
  };

  AdaptiveState state = initial;
  state.t = 0.0;
  Eigen::VectorXd y = pack(state);
  record(state);
  auto f = [&](double t, const Eigen::VectorXd& v) {
    return closed_loop_rhs(unpack(v, initial, t), plant, ref, gains, dz, sub);
  };
  for (long k = 0; k < steps; ++k) {
    const double t = k * dt;
    const Eigen::VectorXd k1 = f(t, y);
    const Eigen::VectorXd k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = f(t + dt, y + dt * k3);
    y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t_next = (k + 1) * dt;
    if (!y.allFinite()) {
      std::ostringstream os;
      os << "state became non-finite at t = " << t_next;
      throw Divergence(os.str(), t_next);
    }
    if ((k + 1) % integration.record_every == 0 || k + 1 == steps) record(unpack(y, initial, t_next));
  }
  return trace;
}

double uncertainty_radius(const PlantSpec& plant, const GainSpec& gains, const Subspace& sub,
                          const AdaptiveState& initial, const UncertaintyRadii& radii) {
  const Eigen::VectorXd e0 = initial.error();
  const double C_x = radii.C_x.value_or(
      trace_form(initial.K_x - gains.K_x, gains.Gamma_x.inverse(), plant.Lambda));
  const double C_r = radii.C_r.value_or(
      trace_form(initial.K_r - gains.K_r, gains.Gamma_r.inverse(), plant.Lambda));
  const double C_theta = radii.C_theta.value_or(
      plant.phi.size() ? trace_form(initial.Theta - plant.Theta, gains.Gamma_theta.inverse(), plant.Lambda) : 0.0);
  double C_f = 0.0;
  if (radii.C_f) {
    C_f = *radii.C_f;
  } else if (plant.f_true) {
    // ‖f̂₀ − f‖²_Λ / γ_f against the full truth, not its projection
    const KernelFunction& f = *plant.f_true;
    const Eigen::Index m = plant.m();
    Eigen::VectorXd lf(f.coeffs().size());
    for (Eigen::Index i = 0; i < f.size(); ++i) lf.segment(i * m, m) = plant.Lambda * f.coeffs().segment(i * m, m);
    const KernelFunction lambda_f(f.kernel(), f.centers(), lf);
    double norm2 = rkhs_inner(f, lambda_f);
    if (sub.size() > 0) {
      const KernelFunction fhat(sub.kernel(), sub.centers().points, initial.c_f);
      Eigen::VectorXd lc(initial.c_f.size());
      for (Eigen::Index i = 0; i < sub.size(); ++i) lc.segment(i * m, m) = plant.Lambda * initial.c_f.segment(i * m, m);
      const KernelFunction lambda_fhat(sub.kernel(), sub.centers().points, lc);
      norm2 += rkhs_inner(fhat, lambda_fhat) - 2.0 * rkhs_inner(fhat, lambda_f);
    }
    C_f = std::max(0.0, norm2) / gains.gamma_f;
  }
  for (double c : {C_x, C_r, C_theta, C_f}) {
    if (!(c >= 0.0)) throw InvalidArgument("uncertainty radii must be nonnegative");
  }
  const double budget = e0.dot(gains.P * e0) + C_x + C_r + C_theta + C_f;
  // smallest R with budget < λ_min(P)R², doubled on R²
  return std::sqrt(2.0 * budget / lambda_min_sym(gains.P));
}

Eigen::MatrixXd ball_probe_cloud(int n, double radius, int count, std::uint64_t seed) {
  if (n < 1 || count < 1 || !(radius >= 0.0)) throw InvalidArgument("ball_probe_cloud: bad arguments");
  CounterRng rng(seed, 0x62616c6cULL);
  Eigen::MatrixXd out(n, count);
  // Gaussian direction, radius ∝ U^{1/n}
  for (int j = 0; j < count; ++j) {
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = rng.normal();
    const double len = g.norm();
    const double rad = radius * std::pow(rng.uniform(), 1.0 / n);
    out.col(j) = len > 0.0 ? Eigen::VectorXd(g * (rad / len)) : Eigen::VectorXd::Zero(n);
  }
  return out;
}

DeadzoneFloor deadzone_floor(const Subspace& sub, const KernelFunction& f_true, const GainSpec& gains,
                             const Eigen::MatrixXd& B, double R, double x_bar, const Eigen::MatrixXd& probe_cloud) {
  if (probe_cloud.cols() == 0) throw InvalidArgument("deadzone_floor: empty probe cloud");
  if (!(R >= 0.0) || !(x_bar >= 0.0)) throw InvalidArgument("deadzone_floor: R and x_bar must be nonnegative");
  DeadzoneFloor out{};
  out.R = R;
  out.R_bar = x_bar + R;
  const double reach = probe_cloud.colwise().norm().maxCoeff();
  if (reach > out.R_bar * (1.0 + 1e-12)) {
    throw InvalidArgument("deadzone_floor: probe cloud leaves the ball of radius x_bar + R");
  }
  const KernelFunction approx = sub.size() ? project_function(sub, f_true)
                                           : KernelFunction(f_true.kernel(), Eigen::MatrixXd(f_true.ambient_dim(), 0),
                                                            Eigen::VectorXd(0));
  out.sup_residual = (f_true.evaluate(probe_cloud) - approx.evaluate(probe_cloud)).colwise().norm().maxCoeff();
  const double pb = spectral_norm(gains.P * B);
  const double lq = lambda_min_sym(gains.Q);
  out.consistent = lambda_max_sym(gains.P) / lq * R * pb * out.sup_residual;
  out.printed = R * pb * lq * lambda_min_sym(gains.P) * out.sup_residual;
  return out;
}

TailError ultimate_error(const Trace& trace, double tail_fraction) {
  if (trace.rows.empty()) throw InvalidArgument("ultimate_error: empty trace");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw InvalidArgument("tail_fraction must lie in (0, 1]");
  const auto total = trace.rows.size();
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tail_fraction * total)));
  TailError out{0.0, 0.0};
  for (std::size_t k = total - std::min(keep, total); k < total; ++k) {
    out.norm_e = std::max(out.norm_e, trace.rows[k].norm_e);
    out.ePe = std::max(out.ePe, trace.rows[k].ePe);
  }
  return out;
}

DescentReport check_lyapunov_descent(const Trace& trace, const DeadzoneSpec& dz) {
  DescentReport rep;
  for (std::size_t k = 0; k + 1 < trace.rows.size(); ++k) {
    const auto& a = trace.rows[k];
    const auto& b = trace.rows[k + 1];
    if (a.ePe <= dz.delta) continue;
    ++rep.checked;
    const double rate = (b.V - a.V) / (b.t - a.t);
    const double tol = 10.0 * trace.dt * a.rhs_norm;
    if (rate > tol) {
      ++rep.violations;
      if (rate - tol > rep.worst_excess || rep.violations == 1) {
        rep.worst_excess = rate - tol;
        rep.worst_time = a.t;
      }
    }
  }
  rep.ok = rep.violations == 0;
  if (!rep.ok) {
    std::ostringstream os;
    os << "Lyapunov descent violated at " << rep.violations << " of " << rep.checked
       << " out-of-deadzone steps (worst excess " << rep.worst_excess << " at t = " << rep.worst_time
       << "); the learning laws use the verbatim signs (minus on K_x, K_r; plus on Theta, f) and the sign "
          "convention of the estimate errors may be inconsistent with this plant";
    rep.diagnostic = os.str();
  }
  return rep;
}

FreezeReport check_deadzone_freeze(const Trace& trace, const DeadzoneSpec& dz) {
  FreezeReport rep;
  for (const auto& row : trace.rows) {
    if (row.ePe > dz.delta) continue;
    ++rep.inside;
    if (row.estimate_rate != 0.0) ++rep.nonzero;
  }
  return rep;
}

}  // namespace mvrkhs
