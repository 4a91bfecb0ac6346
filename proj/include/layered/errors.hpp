#pragma once

#include <stdexcept>
#include <string>

namespace layered {

/// Raised when caller-supplied data violates an operation's preconditions.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a factorization or solve fails on data that passed validation.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant (mesh symmetry, support containment) does not hold.
class ConsistencyError : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

}  // namespace layered
