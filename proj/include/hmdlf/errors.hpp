#pragma once

#include <stdexcept>
#include <string>

namespace hmdlf {

/// Dimension or extent mismatch between operands.
struct ShapeError : std::invalid_argument {
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid or inconsistent configuration (unknown keys, bad model kind, ...).
struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed or unusable input data (CSV parse failures, duplicate
/// timestamps, empty series, ...).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// File I/O and serialization failures (unreadable paths, version mismatch,
/// truncated model files).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown: diverged training, non-finite loss, singular solve.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hmdlf
