#pragma once

#include <stdexcept>
#include <string>

namespace lpmkl {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad shapes, non-finite values, broken preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A kernel (or kernel-derived quantity) collapsed to zero where a positive
/// scale is needed, e.g. all points coincide in feature space.
class DegenerateKernelError : public Error {
 public:
  using Error::Error;
};

/// The mixing update has no admissible solution (all ||w_m|| vanish, or an
/// inverse-power update met a zero norm).
class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Iteration cap reached. Derived types carry the best iterate.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Primal objective kept increasing across a mixing step after the SVM
/// tolerance had already been tightened the maximum number of times.
class StallError : public Error {
 public:
  using Error::Error;
};

/// I/O failure or malformed file.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lpmkl
