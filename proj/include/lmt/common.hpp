#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lmt {

// Error categories map one-to-one onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a schema, a type invariant or a precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numerical failure inside a fit (rank deficiency, non-convergence, ...).
class EstimationError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline bool is_defined(double v) { return std::isfinite(v); }

}  // namespace lmt
