#pragma once

#include <stdexcept>
#include <string>

namespace chainfolio {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input. The CLI maps this to exit code 1.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Events or entries that violate (block, log_index) ordering.
class OrderingError : public InputError {
 public:
  using InputError::InputError;
};

/// A pipeline stage was asked to run before its upstream outputs exist.
class DependencyError : public InputError {
 public:
  using InputError::InputError;
};

/// The reference balance source could not answer a probe. Distinct from a
/// balance mismatch, which is reported through FilterReport.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Degenerate numerics (zero market variance, unidentifiable fits, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace chainfolio
