#pragma once

#include <stdexcept>
#include <string>

namespace liahr {

/// Root of the toolkit's exception hierarchy. The CLI maps each subclass to
/// its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown options, missing secrets, invalid parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a schema or invariant (corpus files, logs, labels).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A seeded draw could not be satisfied (pool too small, no donor).
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Model output could not be turned into labels or an assessment.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Remote backend failure after the retry policy was exhausted.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// 401/403 from a backend. Never retried.
class AuthError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// Logs do not cover the examples a pipeline mode needs.
class CoverageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace liahr
