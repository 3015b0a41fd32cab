#pragma once

#include <stdexcept>
#include <string>

namespace mvrkhs {

/// Base of every error raised by the library. `kind()` is a stable token used
/// by the command-line front end for its machine-readable error line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_argument"; }
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "dimension_mismatch"; }
};

class IllConditioned : public Error {
 public:
  IllConditioned(const std::string& what, double min_separation)
      : Error(what), min_separation_(min_separation) {}
  const char* kind() const noexcept override { return "ill_conditioned"; }
  double min_separation() const noexcept { return min_separation_; }

 private:
  double min_separation_;
};

class NotHurwitz : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "not_hurwitz"; }
};

class Divergence : public Error {
 public:
  Divergence(const std::string& what, double time) : Error(what), time_(time) {}
  const char* kind() const noexcept override { return "divergence"; }
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

/// An invariant gate inside a module failed (e.g. Lyapunov descent).
class GateFailure : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "gate_failure"; }
};

}  // namespace mvrkhs
