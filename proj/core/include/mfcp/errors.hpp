#pragma once

#include <stdexcept>
#include <string>

namespace mfcp {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: shape mismatches, violated preconditions, malformed files.
/// The CLI maps it to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Calibration set too small for the requested significance level.
class InsufficientCalibrationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Numerical failure: divergent training, non-convergent decomposition.
/// The CLI maps it to exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfcp
