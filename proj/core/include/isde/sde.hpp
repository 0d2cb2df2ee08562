#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "isde/state.hpp"

namespace isde {

/// The interpolating SDE families. Each is defined by a stiffness gamma(t)
/// and a diffusion g(t); k(t) and sigma(t) follow from them.
enum class SdeKind { kFOUVE, kOUVE, kBBED, kOT, kBrownianBridge };

std::string_view to_string(SdeKind kind);
/// Accepts the canonical names ("fOUVE", "OUVE", "BBED", "OT", "BrownianBridge"),
/// case-insensitively. Throws ParameterError otherwise.
SdeKind sde_kind_from_string(std::string_view name);

/// Schedule parameters. Which fields are read depends on `kind`:
///   fOUVE, OUVE      sigma_min, sigma_max, gamma0
///   BBED             c, r
///   OT               sigma_max
///   BrownianBridge   (none)
/// `t_rev` and `delta` default to the family's reverse start and 1e-2.
struct SdeParams {
  SdeKind kind = SdeKind::kFOUVE;
  double sigma_min = 1e-3;
  double sigma_max = 0.1;
  double gamma0 = 2.0;
  double c = 0.08;
  double r = 2.6;
  std::optional<double> t_rev;
  std::optional<double> delta;

  /// Throws ParameterError when a field read by `kind` is invalid.
  void validate() const;
};

/// Isotropic Gaussian N(mean, std^2 I).
struct GaussianKernel {
  State mean;
  double std = 0.0;
};

/// Immutable schedule bundle of one interpolating SDE
///
///   dx = gamma(t) (y - x) dt + g(t) dw,   mean (1 - k(t)) x0 + k(t) y.
///
/// All quantities are scalar functions of diffusion time; they act on states
/// isotropically. Instances are cheap to copy and safe to share across threads.
class InterpolatingSde {
 public:
  explicit InterpolatingSde(const SdeParams& params);

  const SdeParams& params() const noexcept { return params_; }
  SdeKind kind() const noexcept { return params_.kind; }

  /// Horizon where k reaches 1: +inf for fOUVE/OUVE, 1 otherwise.
  double t_max() const noexcept;
  /// Reverse-process start T.
  double t_rev() const noexcept { return t_rev_; }
  /// Reverse-process stop; scores are never needed below it.
  double delta() const noexcept { return delta_; }

  double k(double t) const;
  double k_prime(double t) const;
  /// 1 - k(t), evaluated without cancellation. Also exp(-int_0^t gamma).
  double one_minus_k(double t) const;
  /// int_0^t gamma(s) ds in closed form.
  double integrated_gamma(double t) const;
  /// Throws SingularityError at or beyond a finite horizon.
  double gamma(double t) const;
  double g(double t) const;
  double g_squared(double t) const;
  double sigma(double t) const;
  double variance(double t) const;
  /// d/dt variance(t). Closed form except for BBED, where it follows from the
  /// variance ODE var' = g^2 - 2 gamma var.
  double variance_derivative(double t) const;
  /// True when variance(t) has a closed form (everything but BBED).
  bool has_closed_form_variance() const noexcept { return kind() != SdeKind::kBBED; }

 private:
  struct BbedTable;

  void check_time(double t) const;

  SdeParams params_;
  double t_rev_;
  double delta_;
  double log_ratio_ = 0.0;  // ln(sigma_max / sigma_min)
  std::shared_ptr<const BbedTable> bbed_;
};

InterpolatingSde make_sde(const SdeParams& params);

/// k'(t) / (1 - k(t)). Throws SingularityError when k(t) >= 1.
double gamma_from_k(const InterpolatingSde& sde, double t);

/// 1 - exp(-int_0^t gamma), the integral taken by adaptive quadrature.
double k_from_gamma(const InterpolatingSde& sde, double t);

/// Variance of x_t given x0 obtained from the diffusion by quadrature:
///
///   var_t = (1-k(t))^2 var_0 + int_0^t ((1-k(t)) / (1-k(u)))^2 g(u)^2 du
///
/// var_0 is sigma(0)^2 of the schedule, nonzero only for fOUVE. With it the
/// result reproduces sigma(t)^2 for every family.
double variance_from_diffusion(const InterpolatingSde& sde, double t);

/// The quadrature term alone (variance accumulated from a deterministic x0).
double fluctuation_variance(const InterpolatingSde& sde, double t);

/// g^2 = var' + 2 gamma var. Closed-form var' where available, a central
/// difference of the tabulated variance for BBED. Throws
/// InconsistentScheduleError when the result is negative beyond roundoff.
double diffusion_from_variance(const InterpolatingSde& sde, double t);

/// (1 - k(t)) x0 + k(t) y.
State mean_evolution(const InterpolatingSde& sde, const State& x0, const State& y, double t);

GaussianKernel perturbation_kernel(const InterpolatingSde& sde, const State& x0, const State& y,
                                   double t);

/// mean_evolution + sigma(t) z, one standard normal per coordinate.
State sample_forward(const InterpolatingSde& sde, const State& x0, const State& y, double t,
                     Rng& rng);

/// Fundamental solution (1 - k(t)) / (1 - k(s)) for s <= t. Lies in (0, 1].
double psi(const InterpolatingSde& sde, double s, double t);

/// gamma(t) (y - x).
State drift(const InterpolatingSde& sde, const State& x, const State& y, double t);

void check_same_dimension(const State& a, const State& b, const char* what);

}  // namespace isde
