#pragma once

#include <stdexcept>
#include <string>

namespace prbcast {

/// Base class for all engine errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid input: bad configuration, malformed files, out-of-domain
/// arguments. The CLI maps this family to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Not enough data for the requested operation; the message reports
/// required vs available sizes.
class SizingError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Malformed file content; the message carries the offending line number.
class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// A domain invariant does not hold (capacity exceeded, negative step, ...).
class ValidationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Argument outside a function's mathematical domain.
class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Tensor shape mismatch; names the op and both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced where finite math was required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An API contract was broken by the caller (wrong lengths, non-scalar loss).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Operation requires state that is absent (e.g. forecasting before training).
class StateError : public Error {
 public:
  using Error::Error;
};

/// A metric's scale denominator is degenerate (zero).
class DegenerateScaleError : public Error {
 public:
  using Error::Error;
};

}  // namespace prbcast
