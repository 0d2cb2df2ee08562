#pragma once

#include "isde/sde.hpp"

namespace isde {

enum class WeightMethod {
  kAuto,        ///< closed form where one exists, quadrature otherwise
  kClosedForm,  ///< throws ParameterError when the family has none
  kQuadrature,
};

/// True for the families with exponential integrands (fOUVE, OUVE).
bool has_closed_form_weights(const InterpolatingSde& sde) noexcept;

/// Signed Taylor weight of the score term over one reverse step,
///
///   w_n = int_{t_from}^{t_to} g(tau)^2 / (2 (1 - k(tau))) (tau - t_from)^n / n! dtau,
///
/// integrated in the step's own (descending) orientation, so w_0 < 0 when
/// t_to < t_from. n is 0 or 1.
double omega_weight(const InterpolatingSde& sde, int n, double t_from, double t_to,
                    WeightMethod method = WeightMethod::kAuto);

/// Same construction for noise-predicting models: the integrand carries an
/// extra 1 / sigma(tau), so that the Taylor expansion acts on rho instead of s.
/// w_0 equals sigma(t_to)/(1-k(t_to)) - sigma(t_from)/(1-k(t_from)).
double noise_omega_weight(const InterpolatingSde& sde, int n, double t_from, double t_to,
                          WeightMethod method = WeightMethod::kAuto);

/// Standard deviation of the exactly transported Ito increment of one step,
///
///   I = (1 - k(t_to)) sqrt( int_{t_to}^{t_from} (g(tau) / (1 - k(tau)))^2 dtau ).
double ito_increment(const InterpolatingSde& sde, double t_from, double t_to,
                     WeightMethod method = WeightMethod::kAuto);

/// int_a^b e^{rate tau} (tau - a)^n / n! dtau for n in {0, 1}, stable for small
/// |rate (b - a)|.
double exponential_moment(double rate, double a, double b, int n);

}  // namespace isde
