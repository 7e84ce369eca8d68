#pragma once

#include <stdexcept>
#include <string>

namespace dcdm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf reached a place where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data, configuration or checkpoint.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint header or version is not understood.
class VersionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dcdm
