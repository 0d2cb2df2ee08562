#pragma once

#include <cstddef>
#include <functional>

namespace isde {

struct QuadResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
};

struct QuadOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  std::size_t max_subdivisions = 2000;
};

/// Adaptive Gauss-Kronrod 7-15 quadrature with global bisection of the interval
/// carrying the largest error estimate.
///
/// Converged when the summed error estimate is at most
/// max(abs_tol, rel_tol * |value|), or when it reaches the roundoff floor of
/// the integrand. `b < a` is accepted and returns -integrate(f, b, a).
///
/// Throws DomainError on a nonfinite integrand sample and NumericError
/// (carrying the best estimate) once `max_subdivisions` is exhausted.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     const QuadOptions& options = {});

inline QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                            double abs_tol, double rel_tol) {
  return integrate(f, a, b, QuadOptions{abs_tol, rel_tol});
}

}  // namespace isde
