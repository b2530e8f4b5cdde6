#pragma once

#include <stdexcept>
#include <string>

namespace gsim {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: unknown benchmark, malformed model file, invalid flags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The model produced something it must not (negative rate, non-finite drift).
class ModelError : public Error {
 public:
  using Error::Error;
};

// Non-finite value met while integrating a segment.
class IntegrationError : public ModelError {
 public:
  IntegrationError(const std::string& what, double substep_time)
      : ModelError(what), substep_time_(substep_time) {}
  double substep_time() const noexcept { return substep_time_; }

 private:
  double substep_time_;
};

// The model is valid but cannot be handled by the requested solver.
class UnsupportedModelError : public ModelError {
 public:
  using ModelError::ModelError;
};

// An operation was called in a state that violates its precondition.
class UsageError : public Error {
 public:
  using Error::Error;
};

// An argument lies outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Probability conservation or another engine invariant broke.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// A brute-force solver refused because the problem is too large.
class GuardError : public Error {
 public:
  GuardError(const std::string& what, std::size_t size)
      : Error(what), size_(size) {}
  std::size_t size() const noexcept { return size_; }

 private:
  std::size_t size_;
};

}  // namespace gsim
