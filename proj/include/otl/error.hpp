#pragma once

#include <stdexcept>
#include <string>

namespace otl {

// Parameter outside the family's box, nonpositive Fisher value, negative CMI.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller broke a stated precondition (mismatched shapes, unequal shared coordinates).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An input combination the evaluator refuses to default silently.
class UnsupportedInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Singular blocks, failed factorizations.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every grid node ended at -inf: prior and data contradict each other on the grid.
class DegeneratePosterior : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Bad scenario configuration. `key()` is the offending key path, empty if none applies.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace otl
