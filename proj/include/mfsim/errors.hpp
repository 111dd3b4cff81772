#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model, coupling or run configuration. May carry several messages.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg), messages_{msg} {}
  explicit ConfigError(std::vector<std::string> msgs)
      : Error(join(msgs)), messages_(std::move(msgs)) {}

  const std::vector<std::string>& messages() const noexcept { return messages_; }

 private:
  static std::string join(const std::vector<std::string>& msgs) {
    std::string out;
    for (const auto& m : msgs) {
      if (!out.empty()) out += "; ";
      out += m;
    }
    return out;
  }
  std::vector<std::string> messages_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg, std::vector<double> where = {})
      : Error(msg), where_(std::move(where)) {}
  /// Point (quadrature node, particle position, ...) where the failure occurred.
  const std::vector<double>& where() const noexcept { return where_; }

 private:
  std::vector<double> where_;
};

/// Raised by the particle and reduced integrators when the state leaves the
/// finite region |x| <= 1e6.
class BlowUpError : public NumericError {
 public:
  BlowUpError(const std::string& msg, double t, std::size_t index)
      : NumericError(msg), t_(t), index_(index) {}
  double time() const noexcept { return t_; }
  std::size_t index() const noexcept { return index_; }

 private:
  double t_;
  std::size_t index_;
};

class BracketError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfsim
