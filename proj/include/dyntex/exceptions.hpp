#pragma once

#include <stdexcept>
#include <string>

namespace dyntex {

// Error taxonomy, mirrored one-to-one by the CLI exit codes:
// ConfigError -> 1, DataError -> 2, NumericError -> 3.

// A parameter or configuration value outside its documented range.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (files, matrix shapes, labels).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure failed to reach its contract (non-convergence,
// degenerate step, rank deficiency discovered mid-computation).
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Thrown by retract() when a column of the stepped matrix vanishes; the
// line search catches this and shrinks the step.
class RetractionError : public NumericError {
public:
  using NumericError::NumericError;
};

} // namespace dyntex
