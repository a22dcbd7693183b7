#pragma once

#include <stdexcept>
#include <string>

namespace rkf {

// Non-finite or otherwise malformed numeric input.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Out-of-range tuning parameter (clipping height, radius, ...).
struct InvalidParameter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Model hyper-parameters violating their invariants (non-PSD covariance, ...).
struct InvalidModel : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Recursion broke down (non-finite Jacobian, covariance lost PSD-ness).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structured config file failed to parse or validate.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rkf
