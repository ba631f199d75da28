#pragma once

#include <stdexcept>
#include <string>

namespace bats {

// Input outside an operation's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The exact idle-time chain needs an integer source slot length.
class UnsupportedOmegaError : public DomainError {
 public:
  using DomainError::DomainError;
};

// A requested number of batches cannot be met by any recoding scheme.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Work estimate above the hard limit of an exhaustive search.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A simulated transfer failed to accumulate enough rank in its batch budget.
class NonTerminationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bats
