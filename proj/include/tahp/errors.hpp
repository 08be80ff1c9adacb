#pragma once

#include <stdexcept>
#include <string>

namespace tahp {

// Tensor shape / dimension mismatches. Messages carry both shapes.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad user-facing configuration (presets, hyperparameters, flags).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Data that violates the event-sequence contract (ordering, type range,
// minimum length). Messages name the offending line where applicable.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Out-of-domain queries, e.g. intensity before the first event.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf surfaced from numerics instead of propagating silently.
struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tahp
