#pragma once

#include <stdexcept>
#include <string>

namespace qrng {

/// Raised when an operation's inputs violate its contract.
class DomainError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a statistical or numerical procedure cannot produce a result
/// (rank-deficient fit, flat fringe, entropy budget exceeded).
class ComputeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace qrng
