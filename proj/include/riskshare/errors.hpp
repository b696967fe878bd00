#pragma once

#include <stdexcept>
#include <string>

namespace riskshare {

// Input violates a type invariant (bad probabilities, negative threshold, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Two inputs disagree on the number of incident types.
class DimensionMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// A numerical procedure failed: degenerate data, non-convergence, unreachable
// quantile level.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The CDF never reached the requested level inside the search range.
class UnreachableLevel : public NumericFailure {
 public:
  using NumericFailure::NumericFailure;
};

}  // namespace riskshare
