#pragma once

#include <stdexcept>
#include <string>

namespace confound_ui {

// Base for every error raised by the library. Commands map any Error to a
// nonzero exit code; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of a function (e.g. quantile at 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Rank-deficient design or singular bread matrix.
class SingularityError : public Error {
 public:
  using Error::Error;
};

// Treatment vector with a single class, or an arm too small to fit.
class DegenerateTreatmentError : public Error {
 public:
  using Error::Error;
};

// Propensity at (numerically) 0 or 1 on a row where it is used as a divisor.
class OverlapError : public Error {
 public:
  using Error::Error;
};

// Assumed rho makes the corrected residual variance non-positive.
class InfeasibleRhoError : public Error {
 public:
  InfeasibleRhoError(const std::string& what, double rho, int arm)
      : Error(what), rho_(rho), arm_(arm) {}
  double rho() const noexcept { return rho_; }
  int arm() const noexcept { return arm_; }

 private:
  double rho_;
  int arm_;
};

// Covariance matrix that is not positive semi-definite.
class DecompositionError : public Error {
 public:
  using Error::Error;
};

// Malformed user input (CSV content, column mapping, CLI values).
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace confound_ui
