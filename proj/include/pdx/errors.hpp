#pragma once

#include <stdexcept>
#include <string>

namespace pdx {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (matrix orders, sample counts).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the set where the operation is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A caller-side precondition does not hold (support, leakage, grid kind).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The grid cannot resolve the requested quantity.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Iterative numerics failed to converge or produced non-finite values.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The requested combination is not supported (e.g. no restricted propagator).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pdx
