#include "mvrkhs/commands.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "mvrkhs/adaptive_control.hpp"
#include "mvrkhs/complexity.hpp"
#include "mvrkhs/csv.hpp"
#include "mvrkhs/error.hpp"
#include "mvrkhs/random.hpp"

namespace fs = std::filesystem;

namespace mvrkhs {

void RunReport::metric(const std::string& key, double value) { metrics.emplace_back(key, csv::number(value)); }

void RunReport::metric(const std::string& key, const std::string& value) { metrics.emplace_back(key, value); }

std::string RunReport::get(const std::string& key) const {
  for (const auto& [k, v] : metrics) {
    if (k == key) return v;
  }
  return {};
}

void RunReport::write(std::ostream& os) const {
  os << "command=" << command << '\n'
     << "config_digest=" << config_digest << '\n'
     << "wall_seconds=" << csv::number(wall_seconds) << '\n';
  for (const auto& f : outputs) os << "output=" << f << '\n';
  for (const auto& [k, v] : metrics) os << k << '=' << v << '\n';
}

namespace {

using config::Json;
using config::Section;
using Clock = std::chrono::steady_clock;

class Run {
 public:
  Run(const char* name, const Json& cfg, const fs::path& out) : out_(out), start_(Clock::now()) {
    report_.command = name;
    report_.config_digest = config::digest(cfg.dump());
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + out_.string() + "': " + ec.message());
  }

  /// Opens an output file; the file is listed in the report.
  std::ofstream open(const std::string& name) {
    std::ofstream os(out_ / name);
    if (!os) throw ConfigError("cannot write '" + (out_ / name).string() + "'");
    report_.outputs.push_back(name);
    return os;
  }

  RunReport& report() { return report_; }

  RunReport finish() {
    report_.wall_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    return report_;
  }

 private:
  fs::path out_;
  Clock::time_point start_;
  RunReport report_;
};

void check_command(Section& root, const std::string& expected) {
  const std::string declared = root.string_or("command", expected);
  if (declared != expected) {
    throw ConfigError("config.command: file is for '" + declared + "', invoked as '" + expected + "'");
  }
}

/// Bump target f = ℰ(Lv) from {bump, quadrature_nodes}.
KernelFunction bump_target(Section s, const OperatorKernel& kernel, const Manifold& manifold) {
  const Bump b = config::bump(s.child("bump"));
  const int nodes = s.integer_or("quadrature_nodes", 400);
  s.finish();
  return make_bump_target(kernel, manifold, b, nodes);
}

}  // namespace

// ---------------------------------------------------------------------------

RunReport cmd_interp(const Json& cfg, const fs::path& out_dir, std::optional<std::uint64_t> /*seed*/) {
  Section root(cfg, "config");
  check_command(root, "interp");
  const OperatorKernel kernel = config::kernel(root.child("kernel"));
  std::optional<config::ManifoldConfig> mf;
  if (root.has("manifold")) mf = config::manifold(root.child("manifold"));
  const CenterSet centers = config::centers(root.child("centers"), mf ? &*mf : nullptr);
  const Eigen::Index m = kernel.output_dim();
  const Eigen::Index N = centers.size();

  // F_N is m×N: explicit rows (one per center), zero, a bump target or a span function
  Eigen::MatrixXd samples;
  const std::string source = root.string_or("samples_from", "values");
  if (source == "zero") {
    samples = Eigen::MatrixXd::Zero(m, N);
  } else if (source == "values") {
    samples = root.matrix("samples").transpose();
  } else if (source == "target") {
    if (!mf) throw ConfigError("config.target: a bump target needs a manifold");
    samples = bump_target(root.child("target"), kernel, mf->manifold).evaluate(centers.points);
  } else if (source == "span") {
    const Eigen::VectorXd c = root.vector("span_coefficients");
    samples = KernelFunction(kernel, centers.points, c).evaluate(centers.points);
  } else {
    throw ConfigError("config.samples_from: expected values, zero, target or span");
  }
  root.finish();
  if (samples.rows() != m || samples.cols() != N) {
    throw ConfigError("config.samples: expected one row of " + std::to_string(m) + " values per center");
  }

  Run run("interp", cfg, out_dir);
  const Subspace sub = build_subspace(kernel, centers);
  const KernelFunction f = project(sub, samples);
  {
    auto os = run.open("coefficients.csv");
    write_kernel_function_csv(os, f);
  }
  const Eigen::MatrixXd fitted = f.evaluate(centers.points);
  const Eigen::VectorXd residual = (fitted - samples).colwise().norm();
  {
    auto os = run.open("residuals.csv");
    os << "index,residual\n";
    for (Eigen::Index i = 0; i < residual.size(); ++i) os << i << ',' << csv::number(residual[i]) << '\n';
  }
  const double scale = std::max(1.0, samples.size() ? samples.cwiseAbs().maxCoeff() : 0.0);
  run.report().metric("centers", static_cast<double>(N));
  run.report().metric("jitter", sub.jitter());
  run.report().metric("max_residual", residual.size() ? residual.maxCoeff() : 0.0);
  run.report().metric("relative_residual", residual.size() ? residual.maxCoeff() / scale : 0.0);
  run.report().metric("rkhs_norm", rkhs_norm(f));
  return run.finish();
}

RunReport cmd_power(const Json& cfg, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
  Section root(cfg, "config");
  check_command(root, "power");
  const OperatorKernel kernel = config::kernel(root.child("kernel"));
  const config::ManifoldConfig mf = config::manifold(root.child("manifold"));
  const CenterSet centers = config::centers(root.child("centers"), &mf);
  Section cs = root.child("cloud");
  const std::string source = cs.string_or("source", "manifold");
  const int count = cs.integer_or("count", 2048);
  const double radius = cs.number_or("radius", 1.0);
  cs.finish();
  root.finish();

  Eigen::MatrixXd cloud;
  const Manifold& M = mf.manifold;
  if (source == "manifold") {
    const Eigen::MatrixXd chart = M.chart_grid(count, true);
    cloud.resize(M.ambient_dim(), chart.cols());
    for (Eigen::Index q = 0; q < chart.cols(); ++q) cloud.col(q) = M.chart(chart.col(q));
  } else if (source == "centers") {
    cloud = centers.points;
  } else if (source == "ball") {
    cloud = ball_probe_cloud(M.ambient_dim(), radius, count, seed.value_or(0));
  } else {
    throw ConfigError("config.cloud.source: expected manifold, centers or ball");
  }
  if (cloud.cols() == 0) throw ConfigError("config.cloud: evaluation cloud is empty");

  Run run("power", cfg, out_dir);
  const Subspace sub = centers.size() ? build_subspace(kernel, centers) : Subspace::empty(kernel, M.ambient_dim());
  const PowerSweep sweep = power_sweep(sub, cloud);
  {
    auto os = run.open("power_sweep.csv");
    write_power_sweep_csv(os, cloud, sweep);
  }
  run.report().metric("centers", static_cast<double>(centers.size()));
  run.report().metric("cloud_points", static_cast<double>(cloud.cols()));
  run.report().metric("sup_p2", sweep.p2.maxCoeff());
  run.report().metric("sup_pinf", sweep.pinf.maxCoeff());
  run.report().metric("diagonal_bound", diagonal_bound(kernel));
  run.report().metric("jitter", sub.jitter());
  return run.finish();
}

RunReport cmd_rates(const Json& cfg, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
  Section root(cfg, "config");
  check_command(root, "rates");

  if (root.has("synthetic")) {
    // a planted table: fit only
    Section ss = root.child("synthetic");
    const auto xs = ss.numbers("h");
    const auto ys = ss.numbers("sup_err");
    ss.finish();
    root.finish();
    if (xs.size() != ys.size()) throw ConfigError("config.synthetic: h and sup_err differ in length");
    RateTable table;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      RateRow row;
      row.count = static_cast<int>(i + 1);
      row.fill = xs[i];
      row.sup_err = ys[i];
      row.sup_power = ys[i];
      table.rows.push_back(row);
    }
    Run run("rates", cfg, out_dir);
    {
      auto os = run.open("rates.csv");
      write_rate_csv(os, table);
    }
    if (usable_rows(table, RateY::kSupErr) < 3) {
      run.report().metric("status", "floor reached");
    } else {
      const FitResult fit = fit_order(table, RateX::kFill, RateY::kSupErr);
      run.report().metric("status", "ok");
      run.report().metric("slope", fit.slope);
      run.report().metric("r2", fit.r2);
    }
    return run.finish();
  }

  const OperatorKernel kernel = config::kernel(root.child("kernel"));
  const config::ManifoldConfig mf = config::manifold(root.child("manifold"));
  const std::vector<int> counts = root.integers("N_list");
  StudyOptions opts;
  opts.cloud_count = root.integer_or("cloud_count", 0);
  opts.probe_offset = root.number_or("probe_offset", opts.probe_offset);
  opts.probe_stride = root.integer_or("probe_stride", opts.probe_stride);
  if (mf.candidate_count > 0) {
    throw ConfigError("config.manifold.candidate_count: the rate study sizes its own candidate grid");
  }
  Section ts = root.child("target");
  const std::string kind = ts.string_or("kind", "bump");
  opts.target_id = kind;
  if (counts.empty()) throw ConfigError("config.N_list: must not be empty");

  const Manifold& M = mf.manifold;
  std::optional<KernelFunction> target;
  if (kind == "bump") {
    const Bump b = config::bump(ts.child("bump"));
    const int nodes = ts.integer_or("quadrature_nodes", 400);
    target = make_bump_target(kernel, M, b, nodes);
  } else if (kind == "span" || kind == "zero") {
    // lives on the first (nested) farthest-point subset used by the study
    const Eigen::MatrixXd cand = dense_candidates(M, dense_candidate_count(M, counts.back()));
    const CenterSet base = farthest_point_sample(M, counts.back(), cand).prefix(counts.front());
    Eigen::VectorXd c = Eigen::VectorXd::Zero(base.size() * kernel.output_dim());
    if (kind == "span") {
      CounterRng rng(seed.value_or(0), 0x7370616eULL);
      for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = rng.normal();
    }
    target = KernelFunction(kernel, base.points, c);
  } else {
    throw ConfigError("config.target.kind: expected bump, span or zero");
  }
  ts.finish();
  root.finish();

  Run run("rates", cfg, out_dir);
  const RateTable table = convergence_study(kernel, M, *target, counts, opts);
  {
    auto os = run.open("rates.csv");
    write_rate_csv(os, table);
  }
  {
    auto os = run.open("rates_meta.txt");
    write_rate_sidecar(os, table);
  }
  {
    auto os = run.open("rates_err.dat");
    write_loglog(os, table, RateX::kFill, RateY::kSupErr);
  }
  {
    auto os = run.open("rates_power.dat");
    write_loglog(os, table, RateX::kFill, RateY::kSupPower);
  }
  auto& rep = run.report();
  rep.metric("s", table.s);
  rep.metric("sbar", table.sbar);
  if (usable_rows(table, RateY::kSupErr) < 3) {
    rep.metric("status", "floor reached");
  } else {
    const FitResult fit = fit_order(table, RateX::kFill, RateY::kSupErr);
    rep.metric("status", "ok");
    rep.metric("slope", fit.slope);
    rep.metric("r2", fit.r2);
    rep.metric("rows_used", static_cast<double>(fit.used_rows));
  }
  if (usable_rows(table, RateY::kSupPower) >= 3) {
    rep.metric("power_slope", fit_order(table, RateX::kFill, RateY::kSupPower).slope);
  }
  return run.finish();
}

RunReport cmd_simulate(const Json& cfg, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
  const config::SimulationSetup setup = config::simulation(cfg, seed);
  Run run("simulate", cfg, out_dir);
  const Trace trace = simulate(setup.plant, setup.reference, setup.gains, setup.deadzone, setup.subspace,
                               setup.initial, setup.integration);
  {
    auto os = run.open("trace.csv");
    write_trace_csv(os, trace);
  }
  auto& rep = run.report();
  rep.metric("delta", setup.deadzone.delta);
  if (setup.floor) {
    rep.metric("delta_floor", setup.floor->consistent);
    rep.metric("delta_floor_printed_form", setup.floor->printed);
    rep.metric("sup_residual", setup.floor->sup_residual);
    rep.metric("R", setup.floor->R);
    rep.metric("R_bar", setup.floor->R_bar);
  }
  rep.metric("x_bar", setup.reference.x_bar);
  const TailError tail = ultimate_error(trace, 0.25);
  rep.metric("tail_max_norm_e", tail.norm_e);
  rep.metric("tail_max_ePe", tail.ePe);
  rep.metric("V_initial", trace.rows.front().V);
  rep.metric("V_final", trace.rows.back().V);

  const FreezeReport freeze = check_deadzone_freeze(trace, setup.deadzone);
  rep.metric("deadzone_steps", static_cast<double>(freeze.inside));
  const DescentReport descent = check_lyapunov_descent(trace, setup.deadzone);
  rep.metric("descent_checked", static_cast<double>(descent.checked));
  rep.metric("descent_violations", static_cast<double>(descent.violations));
  if (freeze.nonzero > 0) {
    throw GateFailure("estimates changed inside the deadzone at " + std::to_string(freeze.nonzero) +
                      " recorded steps");
  }
  if (!descent.ok) throw GateFailure(descent.diagnostic);
  return run.finish();
}

RunReport cmd_curse(const Json& cfg, const fs::path& out_dir, std::optional<std::uint64_t> /*seed*/) {
  Section root(cfg, "config");
  check_command(root, "curse");
  const double eps = root.number("epsilon");
  const double s = root.number("s");
  const int ell = root.integer("l");
  const double sbar = root.number("sbar");
  const std::vector<int> dims = root.integers("dims");
  Calibration cal;
  if (auto cs = root.optional_child("calibration")) {
    cal.epsilon = cs->number("epsilon");
    cal.count = cs->number("count");
    cs->finish();
  }
  root.finish();
  if (dims.empty()) throw ConfigError("config.dims: must not be empty");

  Run run("curse", cfg, out_dir);
  const auto rows = curse_comparison(eps, s, ell, sbar, dims, cal);
  {
    auto os = run.open("curse.csv");
    write_curse_csv(os, rows);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) monotone = monotone && rows[i].ratio > rows[i - 1].ratio;
  run.report().metric("N_manifold", rows.front().manifold_count);
  run.report().metric("ratio_strictly_increasing", monotone ? "yes" : "no");
  return run.finish();
}

// ---------------------------------------------------------------------------

int run_cli(int argc, char** argv) {
  CLI::App app{"Kernel approximation on manifolds and deadzone adaptive control experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  using Handler = RunReport (*)(const Json&, const fs::path&, std::optional<std::uint64_t>);
  const std::vector<std::pair<std::string, Handler>> commands = {
      {"interp", cmd_interp}, {"power", cmd_power}, {"rates", cmd_rates}, {"simulate", cmd_simulate}, {"curse", cmd_curse}};
  const std::map<std::string, std::string> help = {
      {"interp", "interpolate samples at centers"},
      {"power", "sweep the power functions over a cloud"},
      {"rates", "convergence study and rate fit"},
      {"simulate", "closed-loop deadzone adaptive control run"},
      {"curse", "center-count scaling, cube against manifold"}};
  std::vector<CLI::App*> subs;
  CLI::Option* seed_opt = nullptr;
  for (const auto& [name, handler] : commands) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", out_dir, "output directory");
    auto* opt = sub->add_option("--seed", seed, "random seed");
    if (name == "simulate") seed_opt = opt;
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      // simulate falls back to the config seed; everything else defaults to 0
      std::optional<std::uint64_t> chosen = seed;
      if (subs[i] == subs[3] && seed_opt->count() == 0) chosen.reset();
      const Json cfg = config::load_file(config_path);
      RunReport report = commands[i].second(cfg, out_dir, chosen);
      report.outputs.push_back("report.txt");
      std::ofstream os(fs::path(out_dir) / "report.txt");
      if (!os) throw ConfigError("cannot write report.txt");
      report.write(os);
      std::cout << commands[i].first << ": wrote " << report.outputs.size() << " files to " << out_dir << '\n';
      for (const auto& [k, v] : report.metrics) std::cout << "  " << k << " = " << v << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace mvrkhs
