#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvrkhs/config.hpp"

namespace mvrkhs {

struct RunReport {
  std::string command;
  std::string config_digest;
  double wall_seconds = 0.0;
  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, std::string>> metrics;

  void metric(const std::string& key, double value);
  void metric(const std::string& key, const std::string& value);
  /// Value of a metric, empty if absent.
  std::string get(const std::string& key) const;
  void write(std::ostream& os) const;
};

// Each command validates the whole document before computing, writes its
// files into `out_dir` (created if needed) and returns the report without
// writing it; run_cli adds report.txt. Without an explicit seed, randomness
// uses the config's integration.seed where present and 0 otherwise.
RunReport cmd_interp(const config::Json& cfg, const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed = std::nullopt);
RunReport cmd_power(const config::Json& cfg, const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed = std::nullopt);
RunReport cmd_rates(const config::Json& cfg, const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed = std::nullopt);
RunReport cmd_simulate(const config::Json& cfg, const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed = std::nullopt);
RunReport cmd_curse(const config::Json& cfg, const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed = std::nullopt);

/// `mvrkhs <interp|power|rates|simulate|curse> --config <path> --out <dir> [--seed <u64>]`.
/// Failures print `error: <kind>: <message>` to stderr and return nonzero.
int run_cli(int argc, char** argv);

}  // namespace mvrkhs
