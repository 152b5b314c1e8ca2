#pragma once

#include <stdexcept>
#include <string>

namespace lmax {

/// Bad input shape, asymmetric matrix, malformed circuit, unknown format.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Distribution or moment parameters out of their domain.
class ParameterError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// The input collapses to something the operation cannot normalize.
class DegenerateInputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Enumeration budget or size guard exceeded.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver ran out of iterations. Carries the best value seen.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best_value, long iterations)
      : std::runtime_error(what), best_value_(best_value), iterations_(iterations) {}

  double best_value() const noexcept { return best_value_; }
  long iterations() const noexcept { return iterations_; }

 private:
  double best_value_;
  long iterations_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lmax
