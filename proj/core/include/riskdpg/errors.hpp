#pragma once

#include <stdexcept>
#include <string>

namespace riskdpg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or dimensions of two operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside its documented domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A risk level leaves no atoms in the tail, i.e. floor(n(1-alpha)) == 0.
class LevelError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A loss or gradient became non-finite. The offending update was not applied.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Not enough stored transitions to draw a batch.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or checkpoint text.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure; the message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace riskdpg
