#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isde {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid construction or call parameters (nonpositive scales, bad orders, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Mismatched state dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A schedule quantity diverges: k(t) reached 1, or a variance vanished where
/// it is used as a divisor.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// The diffusion recovered from a variance schedule came out negative.
class InconsistentScheduleError : public Error {
 public:
  using Error::Error;
};

/// Quadrature could not meet its tolerance. Carries the best estimate.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, double estimate, double error_estimate)
      : Error(what), estimate_(estimate), error_estimate_(error_estimate) {}

  double estimate() const noexcept { return estimate_; }
  double error_estimate() const noexcept { return error_estimate_; }

 private:
  double estimate_;
  double error_estimate_;
};

/// A nonfinite integrand sample.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A solver produced a nonfinite state.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, double time);

  std::size_t step() const noexcept { return step_; }
  double time() const noexcept { return time_; }

 private:
  std::size_t step_;
  double time_;
};

/// Adaptive step size collapsed below representable resolution.
class StiffnessError : public Error {
 public:
  using Error::Error;
};

}  // namespace isde
