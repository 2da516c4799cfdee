#pragma once

#include <stdexcept>
#include <string>

namespace lfk {

/// Bad user-supplied configuration or file content.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input violates an operation precondition (shape mismatch, out-of-domain point, ...).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Iterative solver failed to converge; message carries the residual report.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training diverged (NaN/inf loss).
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg, int last_finite_epoch = -1)
        : std::runtime_error(msg), last_finite_epoch(last_finite_epoch) {}
    int last_finite_epoch;
};

/// A pipeline stage requires an artifact that has not been produced yet.
struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace lfk
