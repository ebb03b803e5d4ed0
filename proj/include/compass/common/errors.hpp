#pragma once

#include <stdexcept>
#include <string>

namespace compass {

/// Shape mismatches, out-of-range arguments, malformed inputs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required upstream artifact (checkpoint, dataset) is missing or stale.
class DependencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration file or command-line options.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Procedural generation or sampling ran out of retries.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No grid path connects the requested cells.
class NoPathError : public GenerationError {
 public:
  using GenerationError::GenerationError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace compass
