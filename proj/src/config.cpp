#include "mvrkhs/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mvrkhs/error.hpp"

namespace mvrkhs::config {

Json parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

Json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

// ---------------------------------------------------------------------------

Section::Section(const Json& node, std::string path) : node_(&node), path_(std::move(path)) {
  if (!node.is_object()) throw ConfigError(path_ + ": expected an object");
}

void Section::fail(const std::string& key, const std::string& what) const {
  throw ConfigError(path_ + "." + key + ": " + what);
}

bool Section::has(const std::string& key) const { return node_->contains(key); }

const Json& Section::at(const std::string& key) {
  if (!has(key)) fail(key, "missing required field");
  used_.insert(key);
  return node_->at(key);
}

const Json& Section::raw(const std::string& key) { return at(key); }

Section Section::child(const std::string& key) {
  const Json& node = at(key);
  if (!node.is_object()) fail(key, "expected an object");
  return Section(node, path_ + "." + key);
}

std::optional<Section> Section::optional_child(const std::string& key) {
  if (!has(key)) return std::nullopt;
  return child(key);
}

double Section::number(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_number()) fail(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(key, "must be finite");
  return d;
}

double Section::number_or(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

int Section::integer(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_number_integer()) fail(key, "expected an integer");
  const auto i = v.get<long long>();
  if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) fail(key, "integer out of range");
  return static_cast<int>(i);
}

int Section::integer_or(const std::string& key, int fallback) { return has(key) ? integer(key) : fallback; }

std::string Section::string(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

std::string Section::string_or(const std::string& key, const std::string& fallback) {
  return has(key) ? string(key) : fallback;
}

std::vector<double> Section::numbers(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_array()) fail(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) fail(key, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> Section::integers(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_array()) fail(key, "expected an array of integers");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) fail(key, "expected an array of integers");
    out.push_back(e.get<int>());
  }
  return out;
}

std::vector<std::string> Section::strings(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_array()) fail(key, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) fail(key, "expected an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

Eigen::VectorXd Section::vector(const std::string& key) {
  const auto v = numbers(key);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd Section::matrix(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_array() || v.empty()) fail(key, "expected a nested array of rows");
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array() || v[i].size() != cols) fail(key, "rows must be arrays of equal length");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!v[i][j].is_number()) fail(key, "matrix entries must be numbers");
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j].get<double>();
    }
  }
  return out;
}

Eigen::MatrixXd Section::gain(const std::string& key, Eigen::Index size) {
  if (has(key) && node_->at(key).is_number()) return number(key) * Eigen::MatrixXd::Identity(size, size);
  Eigen::MatrixXd g = matrix(key);
  if (g.rows() != size || g.cols() != size) fail(key, "expected a scalar or a " + std::to_string(size) + "x" +
                                                          std::to_string(size) + " matrix");
  return g;
}

void Section::finish() const {
  for (auto it = node_->begin(); it != node_->end(); ++it) {
    if (!used_.count(it.key())) throw ConfigError(path_ + "." + it.key() + ": unknown field");
  }
}

// ---------------------------------------------------------------------------

OperatorKernel kernel(Section s) {
  const KernelFamily family = [&] {
    try {
      return parse_kernel_family(s.string("family"));
    } catch (const InvalidArgument& e) {
      throw ConfigError(s.path() + ".family: " + e.what());
    }
  }();
  const double default_index = family == KernelFamily::kWendland ? 1.0 : 0.0;
  const double nu = family == KernelFamily::kMatern ? s.number("nu_or_index") : s.number_or("nu_or_index", default_index);
  const double rho = s.number("lengthscale");
  const int m = s.integer_or("output_dim", 1);
  Eigen::MatrixXd weight = Eigen::MatrixXd::Identity(m, m);
  if (s.has("weight_matrix")) {
    const auto flat = s.numbers("weight_matrix");
    if (static_cast<int>(flat.size()) != m * m) {
      throw ConfigError(s.path() + ".weight_matrix: expected " + std::to_string(m * m) + " row-major entries");
    }
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) weight(i, j) = flat[i * m + j];
    }
  }
  s.finish();
  return OperatorKernel(ScalarKernel(family, nu, rho), weight);
}

ManifoldConfig manifold(Section s) {
  const std::string shape_name = s.string("shape");
  const Shape shape = [&] {
    try {
      return parse_shape(shape_name);
    } catch (const InvalidArgument& e) {
      throw ConfigError(s.path() + ".shape: " + e.what());
    }
  }();
  std::optional<Manifold> m;
  switch (shape) {
    case Shape::kCircle:
      m = Manifold::circle(s.number_or("radius", 1.0), s.integer_or("ambient_dim", 2));
      break;
    case Shape::kSphere:
      m = Manifold::sphere(s.number_or("radius", 1.0), s.integer_or("ambient_dim", 3));
      break;
    case Shape::kTorus: {
      const auto radii = s.numbers("radii");
      if (radii.size() != 2) throw ConfigError(s.path() + ".radii: torus needs [major, minor]");
      m = Manifold::torus(radii[0], radii[1], s.integer_or("ambient_dim", 3));
      break;
    }
    case Shape::kLissajous: {
      const int n = s.integer("ambient_dim");
      const double amp = s.number_or("radius", 1.0);
      if (s.has("frequencies")) {
        m = Manifold::lissajous(n, s.integers("frequencies"), s.numbers("phases"), amp);
      } else {
        m = Manifold::lissajous(n, amp);
      }
      break;
    }
  }
  const int candidates = s.integer_or("candidate_count", 0);
  if (candidates < 0) throw ConfigError(s.path() + ".candidate_count: must be nonnegative");
  s.finish();
  return {*m, candidates};
}

CenterSet centers(Section s, const ManifoldConfig* domain) {
  CenterSet out;
  if (s.has("points")) {
    out.points = s.matrix("points").transpose();
    out.source = CenterSource::kManifold;
  } else {
    const int count = s.integer("count");
    if (count < 0) throw ConfigError(s.path() + ".count: must be nonnegative");
    if (!domain) throw ConfigError(s.path() + ": sampled centers need a manifold");
    const Manifold& mf = domain->manifold;
    if (count == 0) {
      out.points = Eigen::MatrixXd(mf.ambient_dim(), 0);
    } else {
      const int cand = domain->candidate_count > 0 ? domain->candidate_count : dense_candidate_count(mf, count);
      out = farthest_point_sample(mf, count, dense_candidates(mf, cand));
    }
  }
  s.finish();
  return out;
}

Bump bump(Section s) {
  Bump b;
  b.center = s.vector("center");
  b.width = s.number_or("width", b.width);
  b.amplitude = s.number_or("amplitude", b.amplitude);
  s.finish();
  return b;
}

namespace {

Command command(Section s, int m) {
  const std::string kind = s.string("kind");
  Command c;
  if (kind == "constant") {
    c = Command::constant(s.vector("value"));
  } else if (kind == "sinusoid") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
    const Eigen::VectorXd offset = s.has("offset") ? s.vector("offset") : zero;
    const Eigen::VectorXd sa = s.has("sin_amplitude") ? s.vector("sin_amplitude") : zero;
    const Eigen::VectorXd ca = s.has("cos_amplitude") ? s.vector("cos_amplitude") : zero;
    c = Command::sinusoid(offset, sa, ca, s.vector("frequency"));
  } else if (kind == "piecewise") {
    c = Command::piecewise(s.numbers("times"), s.matrix("values").transpose());
  } else {
    throw ConfigError(s.path() + ".kind: unknown command kind '" + kind + "'");
  }
  s.finish();
  if (c.dim() != m) throw ConfigError(s.path() + ": command dimension differs from the plant input dimension");
  return c;
}

}  // namespace

double reference_bound(const ReferenceSpec& ref, double dt, double T_final) {
  Eigen::VectorXd x = ref.x0;
  double best = x.norm();
  auto f = [&](double t, const Eigen::VectorXd& v) -> Eigen::VectorXd { return ref.A_ref * v + ref.B_ref * ref.command(t); };
  const auto steps = static_cast<long>(std::llround(T_final / dt));
  for (long k = 0; k < steps; ++k) {
    const double t = k * dt;
    const Eigen::VectorXd k1 = f(t, x);
    const Eigen::VectorXd k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = f(t + dt, x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    best = std::max(best, x.norm());
  }
  return best;
}

SimulationSetup simulation(const Json& doc, std::optional<std::uint64_t> seed_override) {
  Section root(doc, "config");
  root.string_or("command", "simulate");

  // plant
  Section ps = root.child("plant");
  PlantSpec plant;
  plant.A = ps.matrix("A");
  plant.B = ps.matrix("B");
  const auto n = plant.A.rows();
  const auto m = plant.B.cols();
  plant.Lambda = ps.has("Lambda") ? ps.matrix("Lambda") : Eigen::MatrixXd::Identity(m, m);
  if (ps.has("regressor")) plant.phi = Regressor(ps.strings("regressor"), static_cast<int>(n));
  plant.Theta = ps.has("Theta") ? ps.matrix("Theta") : Eigen::MatrixXd::Zero(plant.phi.size(), m);
  const Eigen::VectorXd x0 = ps.vector("x0");
  std::optional<OperatorKernel> f_kernel;
  std::optional<ManifoldConfig> f_manifold;
  if (auto us = ps.optional_child("uncertainty")) {
    f_kernel = kernel(us->child("kernel"));
    f_manifold = manifold(us->child("manifold"));
    const Bump b = bump(us->child("bump"));
    const int nodes = us->integer_or("quadrature_nodes", 64);
    us->finish();
    plant.f_true = make_bump_target(*f_kernel, f_manifold->manifold, b, nodes);
  }
  ps.finish();
  plant.validate();
  if (x0.size() != n) throw ConfigError("config.plant.x0: wrong length");

  // gains
  Section gs = root.child("gains");
  GainSpec gains;
  gains.K_x = gs.matrix("K_x");
  gains.K_r = gs.matrix("K_r");
  gains.Gamma_x = gs.gain("Gamma_x", n);
  gains.Gamma_r = gs.gain("Gamma_r", m);
  gains.Gamma_theta = plant.phi.size() ? gs.gain("Gamma_theta", plant.phi.size()) : Eigen::MatrixXd(0, 0);
  gains.gamma_f = gs.number("gamma_f");
  gains.Q = gs.gain("Q", n);
  const std::string initial_estimates = gs.string_or("initial_estimates", "zero");
  gs.finish();
  if (initial_estimates != "zero" && initial_estimates != "ideal") {
    throw ConfigError("config.gains.initial_estimates: expected 'zero' or 'ideal'");
  }

  // reference
  Section rs = root.child("reference");
  ReferenceSpec ref;
  const MatchedReference matched = build_matched_reference(plant.A, plant.B, plant.Lambda, gains.K_x, gains.K_r);
  ref.A_ref = rs.has("A_ref") ? rs.matrix("A_ref") : matched.A_ref;
  ref.B_ref = rs.has("B_ref") ? rs.matrix("B_ref") : matched.B_ref;
  ref.command = command(rs.child("command"), static_cast<int>(m));
  ref.x0 = rs.vector("x0");
  if (ref.x0.size() != n) throw ConfigError("config.reference.x0: wrong length");
  const bool has_x_bar = rs.has("x_bar");
  const double x_bar = has_x_bar ? rs.number("x_bar") : 0.0;
  rs.finish();
  gains.P = lyapunov_solve(ref.A_ref, gains.Q);

  // integration
  Section is = root.child("integration");
  IntegrationSpec integration;
  integration.dt = is.number("dt");
  integration.T_final = is.number("T_final");
  integration.record_every = is.integer_or("record_every", 1);
  integration.seed = static_cast<std::uint64_t>(is.integer_or("seed", 0));
  is.finish();
  if (seed_override) integration.seed = *seed_override;
  ref.x_bar = has_x_bar ? x_bar : reference_bound(ref, integration.dt, integration.T_final);

  // subspace
  Section ss = root.child("subspace");
  const OperatorKernel sub_kernel = ss.has("kernel") ? kernel(ss.child("kernel"))
                                    : f_kernel          ? *f_kernel
                                                        : throw ConfigError("config.subspace.kernel: required without plant.uncertainty");
  std::optional<ManifoldConfig> sub_manifold = f_manifold;
  if (ss.has("manifold")) sub_manifold = manifold(ss.child("manifold"));
  const CenterSet cs = centers(ss.child("centers"), sub_manifold ? &*sub_manifold : nullptr);
  ss.finish();
  const Subspace sub = cs.size() ? build_subspace(sub_kernel, cs) : Subspace::empty(sub_kernel, static_cast<int>(n));

  AdaptiveState initial = zero_estimates(plant, ref, sub, x0);
  if (initial_estimates == "ideal") {
    initial.K_x = gains.K_x;
    initial.K_r = gains.K_r;
    initial.Theta = plant.Theta;
    initial.c_f = projected_truth(plant, sub);
  }

  // deadzone
  Section ds = root.child("deadzone");
  DeadzoneSpec dz;
  std::optional<DeadzoneFloor> floor;
  if (ds.has("delta")) {
    dz.delta = ds.number("delta");
  } else {
    const double factor = ds.number("delta_factor");
    const int probes = ds.integer_or("probe_count", 4096);
    UncertaintyRadii radii;
    for (auto [key, slot] : {std::pair{"C_x", &radii.C_x}, std::pair{"C_r", &radii.C_r},
                             std::pair{"C_theta", &radii.C_theta}, std::pair{"C_f", &radii.C_f}}) {
      if (ds.has(key)) *slot = ds.number(key);
    }
    const double R = uncertainty_radius(plant, gains, sub, initial, radii);
    if (plant.f_true) {
      const Eigen::MatrixXd cloud = ball_probe_cloud(static_cast<int>(n), ref.x_bar + R, probes, integration.seed);
      floor = deadzone_floor(sub, *plant.f_true, gains, plant.B, R, ref.x_bar, cloud);
    } else {
      floor = DeadzoneFloor{0.0, 0.0, 0.0, R, ref.x_bar + R};
    }
    dz.delta = factor * floor->consistent;
  }
  ds.finish();
  if (!(dz.delta >= 0.0)) throw ConfigError("config.deadzone: delta must be nonnegative");
  root.finish();

  return SimulationSetup{std::move(plant), std::move(ref), std::move(gains), dz, floor, sub, std::move(initial),
                         integration};
}

std::string digest(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace mvrkhs::config
