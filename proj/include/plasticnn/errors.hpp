// Exception types shared across the library. Each maps to one failure
// class the callers are expected to distinguish (CLI exit codes, harness
// arm isolation, test assertions).
#pragma once

#include <stdexcept>
#include <string>

namespace plasticnn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Vector/matrix length disagreement between caller data and network shape.
struct DimensionError : Error {
  using Error::Error;
};

/// Non-finite values where finite ones are required (diverged training,
/// NaN in a forward trace).
struct NumericError : Error {
  using Error::Error;
};

/// Shaped state (gradients, optimizer state) that no longer matches the
/// network after a structural mutation.
struct StalenessError : Error {
  using Error::Error;
};

/// Operation forbidden by construction rules (growing the output layer,
/// degenerate dropout rate, criterion/stats mismatch).
struct PolicyError : Error {
  using Error::Error;
};

/// Pruning request that would leave a layer without neurons.
struct LayerCollapseError : Error {
  using Error::Error;
};

/// Malformed persisted artifact (checkpoint, CSV, JSONL).
struct ParseError : Error {
  using Error::Error;
};

/// Invalid configuration value; message names the offending key.
struct ConfigError : Error {
  using Error::Error;
};

/// Trigger queried with fewer history records than it needs.
struct NotEnoughHistoryError : Error {
  using Error::Error;
};

}  // namespace plasticnn
