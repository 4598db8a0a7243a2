#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stsopro {

/// An argument outside the documented domain of an operation.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input text. Carries the 1-based line number of the offence.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A run configuration that cannot be executed (non-PD proximal system, mu below its bound, ...).
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A structural invariant was found broken at runtime.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// No feasible rate certificate exists for the given parameters.
class CertificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stsopro
