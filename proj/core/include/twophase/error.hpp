#pragma once

#include <stdexcept>
#include <string>

namespace twophase {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: scenario files, grid sizes, mismatched inputs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A sampled coefficient or kernel violates a model invariant.
class ValidationError : public ConfigError {
 public:
  ValidationError(std::string field, int index, const std::string& what)
      : ConfigError(field + (index >= 0 ? "[" + std::to_string(index) + "]" : std::string()) +
                    ": " + what),
        field_(std::move(field)),
        index_(index) {}

  const std::string& field() const noexcept { return field_; }
  /// Offending cell index, or -1 when the violation is not cell-specific.
  int index() const noexcept { return index_; }

 private:
  std::string field_;
  int index_;
};

/// Failure of a numerical procedure on otherwise valid input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// (lambda - M) is singular or too ill-conditioned to invert.
class SpectralProximityError : public NumericalError {
 public:
  explicit SpectralProximityError(double lambda)
      : NumericalError("resolvent is singular or ill-conditioned at lambda = " +
                       std::to_string(lambda)),
        lambda_(lambda) {}

  double lambda() const noexcept { return lambda_; }

 private:
  double lambda_;
};

/// An iterative method ran out of iterations.
class IterationError : public NumericalError {
 public:
  IterationError(const std::string& what, int iterations, double last_value)
      : NumericalError(what + " (after " + std::to_string(iterations) +
                       " iterations, last value " + std::to_string(last_value) + ")"),
        iterations_(iterations),
        last_value_(last_value) {}

  int iterations() const noexcept { return iterations_; }
  double last_value() const noexcept { return last_value_; }

 private:
  int iterations_;
  double last_value_;
};

/// A diagnostic needs more recorded data than the trajectory holds.
class InsufficientDataError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace twophase
