#pragma once

#include <stdexcept>
#include <string>

namespace drasym {

/// Base of every exception thrown by the library. kind() is a short stable
/// token used in the CLI's machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error("numerical", what) {}
};

struct ConvergenceError : Error {
  ConvergenceError(const std::string& what, double residual)
      : Error("convergence", what), residual(residual) {}
  double residual;
};

struct SearchError : Error {
  explicit SearchError(const std::string& what) : Error("search", what) {}
};

}  // namespace drasym
