#pragma once

#include <stdexcept>
#include <string>

namespace paralesn {

/// Base class for every error raised by the library. The CLI maps the
/// concrete type onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched widths, lengths or matrix shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its documented domain (zero width, even kernel, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Mathematical domain violation, e.g. a negative radicand.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Iterative method ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_estimate)
      : Error(what), last_estimate_(last_estimate) {}
  double last_estimate() const noexcept { return last_estimate_; }

 private:
  double last_estimate_;
};

/// Linear system could not be solved even after regularization.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// Optimizer produced a non-finite loss.
class TrainingFailure : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Generator or experiment configuration that cannot be honoured.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace paralesn
