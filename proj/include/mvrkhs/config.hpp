#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "mvrkhs/adaptive_control.hpp"
#include "mvrkhs/approximation.hpp"
#include "mvrkhs/geometry.hpp"
#include "mvrkhs/kernel.hpp"

namespace mvrkhs::config {

using Json = nlohmann::json;

/// Parses a JSON document; syntax errors become ConfigError.
Json parse(const std::string& text);
Json load_file(const std::string& path);

/// Typed access to one JSON object that remembers which keys were read, so
/// that `finish()` can reject anything unexpected.
class Section {
 public:
  Section(const Json& node, std::string path);

  bool has(const std::string& key) const;
  const Json& raw(const std::string& key);
  Section child(const std::string& key);
  std::optional<Section> optional_child(const std::string& key);

  double number(const std::string& key);
  double number_or(const std::string& key, double fallback);
  int integer(const std::string& key);
  int integer_or(const std::string& key, int fallback);
  std::string string(const std::string& key);
  std::string string_or(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key);
  std::vector<int> integers(const std::string& key);
  std::vector<std::string> strings(const std::string& key);
  Eigen::VectorXd vector(const std::string& key);
  /// Row-major nested array [[…], …].
  Eigen::MatrixXd matrix(const std::string& key);
  /// A scalar g becomes g·I_size; otherwise a size×size matrix.
  Eigen::MatrixXd gain(const std::string& key, Eigen::Index size);

  /// Throws ConfigError naming the first key that was never read.
  void finish() const;
  const std::string& path() const noexcept { return path_; }

 private:
  const Json& at(const std::string& key);
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  const Json* node_;
  std::string path_;
  std::set<std::string> used_;
};

/// {family, nu_or_index, lengthscale, output_dim, weight_matrix?}
OperatorKernel kernel(Section section);

struct ManifoldConfig {
  Manifold manifold;
  int candidate_count;  // 0: choose from the center count
};
/// {shape, radius | radii, ambient_dim, frequencies?, phases?, candidate_count?}
ManifoldConfig manifold(Section section);

/// {count} (farthest-point sample on the manifold) or {points: [[…], …]}.
CenterSet centers(Section section, const ManifoldConfig* domain);

/// {center, width?, amplitude?}
Bump bump(Section section);

/// Everything needed to run one closed-loop simulation.
struct SimulationSetup {
  PlantSpec plant;
  ReferenceSpec reference;
  GainSpec gains;
  DeadzoneSpec deadzone;
  std::optional<DeadzoneFloor> floor;
  Subspace subspace;
  AdaptiveState initial;
  IntegrationSpec integration;
};

SimulationSetup simulation(const Json& doc, std::optional<std::uint64_t> seed_override = std::nullopt);

/// sup ‖x_ref(t)‖ from an RK4 run of the reference model alone.
double reference_bound(const ReferenceSpec& ref, double dt, double T_final);

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string digest(const std::string& text);

}  // namespace mvrkhs::config
