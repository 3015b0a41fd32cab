#pragma once

#include <charconv>
#include <ostream>
#include <string>
#include <system_error>

#include <Eigen/Core>

namespace mvrkhs::csv {

/// Shortest decimal form that parses back to the identical double.
inline std::string number(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline void write_row(std::ostream& os, const Eigen::Ref<const Eigen::VectorXd>& values) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (i) os << ',';
    os << number(values[i]);
  }
}

}  // namespace mvrkhs::csv
