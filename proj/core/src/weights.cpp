#include "isde/weights.hpp"

#include <cmath>
#include <sstream>

#include "isde/errors.hpp"
#include "isde/quadrature.hpp"

namespace isde {

namespace {

// phi_j(z) = int_0^1 e^{z s} s^{j-1} / (j-1)! ds for j in {1, 2}.
double phi(int j, double z) {
  if (std::abs(z) < 0.5) {
    // sum_m z^m / (m! (m + j)); (j-1)! is 1 for j <= 2.
    double term = 1.0;  // z^m / m!
    double sum = 0.0;
    for (int m = 0; m < 40; ++m) {
      const double add = term / static_cast<double>(m + j);
      sum += add;
      if (std::abs(add) < 1e-18 * std::abs(sum)) break;
      term *= z / static_cast<double>(m + 1);
    }
    return sum;
  }
  if (j == 1) return std::expm1(z) / z;
  return (z * std::exp(z) - std::expm1(z)) / (z * z);
}

void check_interval(double t_from, double t_to, const char* what) {
  if (!std::isfinite(t_from) || !std::isfinite(t_to) || t_to < 0.0) {
    throw ParameterError(std::string(what) + ": times must be finite and nonnegative");
  }
  if (t_to > t_from) {
    std::ostringstream os;
    os << what << ": reverse step needs t_to <= t_from (got " << t_from << " -> " << t_to << ")";
    throw ParameterError(os.str());
  }
}

void check_order(int n) {
  if (n != 0 && n != 1) throw ParameterError("weight order n must be 0 or 1");
}

double factorial_power(double x, int n) { return n == 0 ? 1.0 : x; }

constexpr QuadOptions kWeightQuadrature{0.0, 1e-12, 2000};

struct ExponentialIntegrand {
  double scale;
  double rate;
};

// Integrand C e^{rate tau} of the score-weight for the OU families.
ExponentialIntegrand score_integrand(const InterpolatingSde& sde) {
  const SdeParams& p = sde.params();
  const double log_ratio = std::log(p.sigma_max / p.sigma_min);
  const double smin2 = p.sigma_min * p.sigma_min;
  const double rate = 2.0 * log_ratio + p.gamma0;
  if (sde.kind() == SdeKind::kFOUVE) return {smin2 * (log_ratio + p.gamma0), rate};
  return {smin2 * log_ratio, rate};
}

}  // namespace

bool has_closed_form_weights(const InterpolatingSde& sde) noexcept {
  return sde.kind() == SdeKind::kFOUVE || sde.kind() == SdeKind::kOUVE;
}

double exponential_moment(double rate, double a, double b, int n) {
  check_order(n);
  const double h = b - a;
  if (h == 0.0) return 0.0;
  const double hn1 = (n == 0) ? h : h * h;
  return std::exp(rate * a) * hn1 * phi(n + 1, rate * h);
}

double omega_weight(const InterpolatingSde& sde, int n, double t_from, double t_to,
                    WeightMethod method) {
  check_order(n);
  check_interval(t_from, t_to, "omega_weight");
  if (t_from == t_to) return 0.0;
  const bool closed = has_closed_form_weights(sde);
  if (method == WeightMethod::kClosedForm && !closed) {
    throw ParameterError("no closed-form score weights for " + std::string(to_string(sde.kind())));
  }
  if (closed && method != WeightMethod::kQuadrature) {
    const ExponentialIntegrand e = score_integrand(sde);
    return e.scale * exponential_moment(e.rate, t_from, t_to, n);
  }
  auto integrand = [&sde, n, t_from](double tau) {
    return sde.g_squared(tau) / (2.0 * sde.one_minus_k(tau)) * factorial_power(tau - t_from, n);
  };
  return integrate(integrand, t_from, t_to, kWeightQuadrature).value;
}

double noise_omega_weight(const InterpolatingSde& sde, int n, double t_from, double t_to,
                          WeightMethod method) {
  check_order(n);
  check_interval(t_from, t_to, "noise_omega_weight");
  if (t_from == t_to) return 0.0;
  const bool closed = sde.kind() == SdeKind::kFOUVE;
  if (method == WeightMethod::kClosedForm && !closed) {
    throw ParameterError("no closed-form noise weights for " +
                         std::string(to_string(sde.kind())));
  }
  if (closed && method != WeightMethod::kQuadrature) {
    // g^2 / (2 (1-k) sigma) = sigma_min (ln rho + gamma0) e^{(ln rho + gamma0) tau}
    const SdeParams& p = sde.params();
    const double rate = std::log(p.sigma_max / p.sigma_min) + p.gamma0;
    return p.sigma_min * rate * exponential_moment(rate, t_from, t_to, n);
  }
  auto integrand = [&sde, n, t_from](double tau) {
    return sde.g_squared(tau) / (2.0 * sde.one_minus_k(tau) * sde.sigma(tau)) *
           factorial_power(tau - t_from, n);
  };
  return integrate(integrand, t_from, t_to, kWeightQuadrature).value;
}

double ito_increment(const InterpolatingSde& sde, double t_from, double t_to,
                     WeightMethod method) {
  check_interval(t_from, t_to, "ito_increment");
  if (t_from == t_to) return 0.0;
  const bool closed = has_closed_form_weights(sde);
  if (method == WeightMethod::kClosedForm && !closed) {
    throw ParameterError("no closed-form Ito increment for " +
                         std::string(to_string(sde.kind())));
  }
  const double end = sde.one_minus_k(t_to);
  if (closed && method != WeightMethod::kQuadrature) {
    const SdeParams& p = sde.params();
    const double log_ratio = std::log(p.sigma_max / p.sigma_min);
    const double rate = 2.0 * log_ratio + 2.0 * p.gamma0;
    const double smin2 = p.sigma_min * p.sigma_min;
    // int_{t_to}^{t_from} e^{rate tau} dtau, scaled by the family constant.
    const double growth = std::exp(rate * t_to) * std::expm1(rate * (t_from - t_to));
    const double integral = (sde.kind() == SdeKind::kFOUVE)
                                ? smin2 * growth
                                : smin2 * 2.0 * log_ratio * growth / rate;
    return end * std::sqrt(integral);
  }
  auto integrand = [&sde, end](double tau) {
    const double ratio = end / sde.one_minus_k(tau);
    return ratio * ratio * sde.g_squared(tau);
  };
  return std::sqrt(integrate(integrand, t_to, t_from, kWeightQuadrature).value);
}

}  // namespace isde
