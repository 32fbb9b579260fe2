#pragma once

#include <stdexcept>
#include <string>

namespace fixedrank {

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a lift, point or field was violated (wrong base
/// point, non-horizontal input where a horizontal one is required, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// The Sylvester system was numerically singular.
class SylvesterError : public Error {
 public:
  SylvesterError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// A factor lost numerical full rank (or its Gram matrix is too ill
/// conditioned to be used as a point of the factor space).
class RankError : public Error {
 public:
  using Error::Error;
};

/// A matrix handed to a lift is not tangent to the rank-p manifold.
class TangencyError : public Error {
 public:
  using Error::Error;
};

/// Gauge matrix is singular, ill conditioned or not orthogonal.
class GaugeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line) : Error(what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace fixedrank
