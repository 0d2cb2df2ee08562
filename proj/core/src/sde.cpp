#include "isde/sde.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "isde/errors.hpp"
#include "isde/quadrature.hpp"

namespace isde {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

bool finite_horizon(SdeKind kind) {
  return kind == SdeKind::kBBED || kind == SdeKind::kOT || kind == SdeKind::kBrownianBridge;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << name << " must be positive and finite (got " << v << ")";
    throw ParameterError(os.str());
  }
}

}  // namespace

std::string_view to_string(SdeKind kind) {
  switch (kind) {
    case SdeKind::kFOUVE: return "fOUVE";
    case SdeKind::kOUVE: return "OUVE";
    case SdeKind::kBBED: return "BBED";
    case SdeKind::kOT: return "OT";
    case SdeKind::kBrownianBridge: return "BrownianBridge";
  }
  return "unknown";
}

SdeKind sde_kind_from_string(std::string_view name) {
  const std::string n = lower(name);
  if (n == "fouve") return SdeKind::kFOUVE;
  if (n == "ouve") return SdeKind::kOUVE;
  if (n == "bbed") return SdeKind::kBBED;
  if (n == "ot" || n == "optimaltransport" || n == "optimal_transport") return SdeKind::kOT;
  if (n == "brownianbridge" || n == "brownian_bridge" || n == "bb") {
    return SdeKind::kBrownianBridge;
  }
  throw ParameterError("unknown SDE kind '" + std::string(name) + "'");
}

void SdeParams::validate() const {
  switch (kind) {
    case SdeKind::kFOUVE:
    case SdeKind::kOUVE:
      require_positive(sigma_min, "sigma_min");
      require_positive(sigma_max, "sigma_max");
      require_positive(gamma0, "gamma0");
      if (!(sigma_min < sigma_max)) throw ParameterError("sigma_min must be below sigma_max");
      break;
    case SdeKind::kBBED:
      require_positive(c, "c");
      require_positive(r, "r");
      break;
    case SdeKind::kOT:
      require_positive(sigma_max, "sigma_max");
      break;
    case SdeKind::kBrownianBridge:
      break;
  }
  const double horizon = finite_horizon(kind) ? 1.0 : kInfinity;
  const double t_rev_value = t_rev.value_or(finite_horizon(kind) ? 0.999 : 1.0);
  const double delta_value = delta.value_or(1e-2);
  require_positive(t_rev_value, "t_rev");
  require_positive(delta_value, "delta");
  if (!(delta_value < t_rev_value)) throw ParameterError("delta must be below t_rev");
  if (!(t_rev_value < horizon)) throw ParameterError("t_rev must be below the SDE horizon");
}

// Cumulative int_0^{t_j} g(u)^2 / (1-u)^2 du on a uniform grid over [0, t_rev].
// variance(t) = (1-t)^2 (cum[j] + int_{t_j}^t ...).
struct InterpolatingSde::BbedTable {
  static constexpr std::size_t kNodes = 1024;
  double spacing = 0.0;
  std::vector<double> cumulative;
};

InterpolatingSde::InterpolatingSde(const SdeParams& params) : params_(params) {
  params_.validate();
  t_rev_ = params_.t_rev.value_or(finite_horizon(params_.kind) ? 0.999 : 1.0);
  delta_ = params_.delta.value_or(1e-2);
  params_.t_rev = t_rev_;
  params_.delta = delta_;
  if (params_.kind == SdeKind::kFOUVE || params_.kind == SdeKind::kOUVE) {
    log_ratio_ = std::log(params_.sigma_max / params_.sigma_min);
  }
  if (params_.kind == SdeKind::kBBED) {
    auto table = std::make_shared<BbedTable>();
    table->spacing = t_rev_ / static_cast<double>(BbedTable::kNodes - 1);
    table->cumulative.resize(BbedTable::kNodes, 0.0);
    const double c = params_.c;
    const double log_r = std::log(params_.r);
    auto integrand = [c, log_r](double u) {
      const double g = c * std::exp(log_r * u);
      return g * g / ((1.0 - u) * (1.0 - u));
    };
    for (std::size_t j = 1; j < BbedTable::kNodes; ++j) {
      const double a = table->spacing * static_cast<double>(j - 1);
      const double b = table->spacing * static_cast<double>(j);
      table->cumulative[j] =
          table->cumulative[j - 1] + integrate(integrand, a, b, QuadOptions{0.0, 1e-12}).value;
    }
    bbed_ = std::move(table);
  }
}

double InterpolatingSde::t_max() const noexcept {
  return finite_horizon(kind()) ? 1.0 : kInfinity;
}

void InterpolatingSde::check_time(double t) const {
  if (!std::isfinite(t) || t < 0.0) {
    std::ostringstream os;
    os << "diffusion time must be finite and nonnegative (got " << t << ")";
    throw ParameterError(os.str());
  }
  if (t >= t_max()) {
    std::ostringstream os;
    os << to_string(kind()) << ": stiffness diverges at t = " << t << " (horizon " << t_max()
       << ")";
    throw SingularityError(os.str());
  }
}

double InterpolatingSde::k(double t) const { return 1.0 - one_minus_k(t); }

double InterpolatingSde::one_minus_k(double t) const {
  if (!std::isfinite(t) || t < 0.0) check_time(t);
  switch (kind()) {
    case SdeKind::kFOUVE:
    case SdeKind::kOUVE:
      return std::exp(-params_.gamma0 * t);
    default:
      return std::max(0.0, 1.0 - t);
  }
}

double InterpolatingSde::k_prime(double t) const {
  switch (kind()) {
    case SdeKind::kFOUVE:
    case SdeKind::kOUVE:
      return params_.gamma0 * std::exp(-params_.gamma0 * t);
    default:
      return 1.0;
  }
}

double InterpolatingSde::integrated_gamma(double t) const {
  check_time(t);
  switch (kind()) {
    case SdeKind::kFOUVE:
    case SdeKind::kOUVE:
      return params_.gamma0 * t;
    default:
      return -std::log1p(-t);
  }
}

double InterpolatingSde::gamma(double t) const {
  check_time(t);
  switch (kind()) {
    case SdeKind::kFOUVE:
    case SdeKind::kOUVE:
      return params_.gamma0;
    default:
      return 1.0 / (1.0 - t);
  }
}

double InterpolatingSde::g_squared(double t) const {
  check_time(t);
  switch (kind()) {
    case SdeKind::kFOUVE: {
      const double s = params_.sigma_min * std::exp(log_ratio_ * t);
      return s * s * (2.0 * log_ratio_ + 2.0 * params_.gamma0);
    }
    case SdeKind::kOUVE: {
      const double s = params_.sigma_min * std::exp(log_ratio_ * t);
      return s * s * 2.0 * log_ratio_;
    }
    case SdeKind::kBBED: {
      const double g = params_.c * std::pow(params_.r, t);
      return g * g;
    }
    case SdeKind::kOT:
      return params_.sigma_max * params_.sigma_max * 2.0 * t / (1.0 - t);
    case SdeKind::kBrownianBridge:
      return 1.0;
  }
  return 0.0;
}

double InterpolatingSde::g(double t) const { return std::sqrt(g_squared(t)); }

double InterpolatingSde::variance(double t) const {
  check_time(t);
  switch (kind()) {
    case SdeKind::kFOUVE: {
      const double s = params_.sigma_min * std::exp(log_ratio_ * t);
      return s * s;
    }
    case SdeKind::kOUVE: {
      // K^2 (rho^{2t} - e^{-2 gamma0 t}) written without cancellation at small t.
      const double a = log_ratio_ + params_.gamma0;
      const double k2 = params_.sigma_min * params_.sigma_min * log_ratio_ / a;
      return k2 * std::exp(-2.0 * params_.gamma0 * t) * std::expm1(2.0 * a * t);
    }
    case SdeKind::kBBED: {
      const BbedTable& table = *bbed_;
      const auto j = std::min<std::size_t>(static_cast<std::size_t>(t / table.spacing),
                                           BbedTable::kNodes - 1);
      const double node = table.spacing * static_cast<double>(j);
      const double c = params_.c;
      const double log_r = std::log(params_.r);
      auto integrand = [c, log_r](double u) {
        const double g = c * std::exp(log_r * u);
        return g * g / ((1.0 - u) * (1.0 - u));
      };
      const double rest = integrate(integrand, node, t, QuadOptions{0.0, 1e-12}).value;
      return (1.0 - t) * (1.0 - t) * (table.cumulative[j] + rest);
    }
    case SdeKind::kOT:
      return params_.sigma_max * params_.sigma_max * t * t;
    case SdeKind::kBrownianBridge:
      return t * (1.0 - t);
  }
  return 0.0;
}

double InterpolatingSde::sigma(double t) const { return std::sqrt(variance(t)); }

double InterpolatingSde::variance_derivative(double t) const {
  check_time(t);
  switch (kind()) {
    case SdeKind::kFOUVE:
      return 2.0 * log_ratio_ * variance(t);
    case SdeKind::kOUVE: {
      const double a = log_ratio_ + params_.gamma0;
      const double k2 = params_.sigma_min * params_.sigma_min * log_ratio_ / a;
      return k2 * (2.0 * log_ratio_ * std::exp(2.0 * log_ratio_ * t) +
                   2.0 * params_.gamma0 * std::exp(-2.0 * params_.gamma0 * t));
    }
    case SdeKind::kBBED:
      return g_squared(t) - 2.0 * gamma(t) * variance(t);
    case SdeKind::kOT:
      return 2.0 * params_.sigma_max * params_.sigma_max * t;
    case SdeKind::kBrownianBridge:
      return 1.0 - 2.0 * t;
  }
  return 0.0;
}

InterpolatingSde make_sde(const SdeParams& params) { return InterpolatingSde(params); }

double gamma_from_k(const InterpolatingSde& sde, double t) {
  const double denom = sde.one_minus_k(t);
  if (!(denom > 0.0)) {
    std::ostringstream os;
    os << "k(" << t << ") reached 1: stiffness diverges";
    throw SingularityError(os.str());
  }
  return sde.k_prime(t) / denom;
}

double k_from_gamma(const InterpolatingSde& sde, double t) {
  if (t == 0.0) return 0.0;
  if (t >= sde.t_max()) throw SingularityError("k_from_gamma: t must lie below the horizon");
  const QuadResult r = integrate([&sde](double s) { return sde.gamma(s); }, 0.0, t,
                                 QuadOptions{1e-15, 1e-13});
  return -std::expm1(-r.value);
}

double fluctuation_variance(const InterpolatingSde& sde, double t) {
  if (t < 0.0 || t >= sde.t_max()) {
    throw ParameterError("fluctuation_variance: t outside [0, t_max)");
  }
  if (t == 0.0) return 0.0;
  const double end = sde.one_minus_k(t);
  auto integrand = [&sde, end](double u) {
    const double ratio = end / sde.one_minus_k(u);
    return ratio * ratio * sde.g_squared(u);
  };
  return integrate(integrand, 0.0, t, QuadOptions{0.0, 1e-12}).value;
}

double variance_from_diffusion(const InterpolatingSde& sde, double t) {
  const double fluct = fluctuation_variance(sde, t);
  const double var0 = sde.variance(0.0);
  const double transport = sde.one_minus_k(t);
  return transport * transport * var0 + fluct;
}

double diffusion_from_variance(const InterpolatingSde& sde, double t) {
  double derivative = 0.0;
  if (sde.has_closed_form_variance()) {
    derivative = sde.variance_derivative(t);
  } else {
    const double h = 1e-4;
    if (t >= h) {
      derivative = (sde.variance(t + h) - sde.variance(t - h)) / (2.0 * h);
    } else {
      derivative = (-3.0 * sde.variance(t) + 4.0 * sde.variance(t + h) -
                    sde.variance(t + 2.0 * h)) /
                   (2.0 * h);
    }
  }
  const double var = sde.variance(t);
  const double g2 = derivative + 2.0 * sde.gamma(t) * var;
  const double floor = -1e-12 * std::max(std::abs(derivative), 2.0 * sde.gamma(t) * var);
  if (g2 < floor) {
    std::ostringstream os;
    os << "variance schedule implies negative g^2 = " << g2 << " at t = " << t;
    throw InconsistentScheduleError(os.str());
  }
  return std::max(g2, 0.0);
}

void check_same_dimension(const State& a, const State& b, const char* what) {
  if (a.size() != b.size()) {
    std::ostringstream os;
    os << what << ": dimension mismatch (" << a.size() << " vs " << b.size() << ")";
    throw ShapeError(os.str());
  }
}

State mean_evolution(const InterpolatingSde& sde, const State& x0, const State& y, double t) {
  check_same_dimension(x0, y, "mean_evolution");
  const double k = sde.k(t);
  return (1.0 - k) * x0 + k * y;
}

GaussianKernel perturbation_kernel(const InterpolatingSde& sde, const State& x0, const State& y,
                                   double t) {
  return {mean_evolution(sde, x0, y, t), sde.sigma(t)};
}

State sample_forward(const InterpolatingSde& sde, const State& x0, const State& y, double t,
                     Rng& rng) {
  GaussianKernel kernel = perturbation_kernel(sde, x0, y, t);
  State z = rng.gaussian_vector(kernel.mean.size());
  return kernel.mean + kernel.std * z;
}

double psi(const InterpolatingSde& sde, double s, double t) {
  if (!(s <= t)) throw ParameterError("psi(s, t) requires s <= t");
  const double from = sde.one_minus_k(s);
  if (!(from > 0.0)) throw SingularityError("psi: k(s) reached 1");
  return sde.one_minus_k(t) / from;
}

State drift(const InterpolatingSde& sde, const State& x, const State& y, double t) {
  check_same_dimension(x, y, "drift");
  return sde.gamma(t) * (y - x);
}

}  // namespace isde
