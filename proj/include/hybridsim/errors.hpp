#pragma once

#include <stdexcept>
#include <string>

namespace hybridsim {

// Invalid argument or precondition violation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A group has zero weighted events, so no finite rate estimate exists.
class DegenerateFitError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Log-rank statistic is undefined (no events, or zero variance).
class TestUndefinedError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Log density not finite at the starting point of a chain.
class InitializationError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Design or plan inputs that cannot produce positive arm sizes or rates.
class InfeasibleDesignError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Configuration file or command-line value that fails validation.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace hybridsim
