#pragma once

#include <stdexcept>
#include <string>

namespace awe {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input whose shape or content violates an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Configuration values outside their allowed range, unknown keys, etc.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or corrupted archive / checkpoint files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or otherwise numerically unusable state.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A zero-norm vector where a direction is required (cosine geometry).
class DegenerateVector : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace awe
