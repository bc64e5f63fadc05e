#pragma once

#include <stdexcept>
#include <string>

namespace canopy {

/// Raised when a caller breaks an operation's precondition (bad confidence, zero direction, ...).
struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct OutOfBounds : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Invalid configuration values or unknown configuration keys.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scene generation could not satisfy its constraints.
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace canopy
