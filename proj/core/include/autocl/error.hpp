#pragma once

#include <stdexcept>
#include <string>

namespace autocl {

// Base class for all library errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration or an off-grid strategy value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent dataset input.
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by a computation, or an unrecoverable linear solve.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes that do not fit an operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace autocl
