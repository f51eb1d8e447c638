#pragma once

#include <stdexcept>
#include <string>

namespace ebt {

/// Malformed input: bad network structure, scenario schema violations,
/// theorem preconditions that do not hold. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unknown arc / path identifier.
class LookupError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Argument outside the domain where a moment-generating function is finite.
class DomainError : public std::domain_error {
 public:
  DomainError(const std::string& what, double s_max)
      : std::domain_error(what), s_max_(s_max) {}

  double s_max() const noexcept { return s_max_; }

 private:
  double s_max_;
};

}  // namespace ebt
