#pragma once

#include <stdexcept>
#include <string>

namespace qdgf {

/// Raised when an input violates a documented precondition (bad shapes,
/// out-of-range parameters, malformed files). The CLI maps it to exit code 2.
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a computation fails one of its numerical invariants
/// (non-PSD covariance, non-converged eigensolver, broken residual check).
/// The CLI maps it to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qdgf
