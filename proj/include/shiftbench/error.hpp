#pragma once

#include <stdexcept>
#include <string>

namespace shiftbench {

/// Base class for every error the toolkit raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or network dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value went NaN/Inf, or an operation left its numeric domain.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration. Messages name the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A training loop aborted (divergence, missing checkpoint, ...).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, parsed or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace shiftbench
