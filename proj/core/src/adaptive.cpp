#include "isde/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "isde/errors.hpp"

namespace isde {

namespace {

// Dormand-Prince tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
// Difference between the 5th- and embedded 4th-order weights.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

// PI controller constants (beta = 0.04, alpha = 1/5 - 0.75 beta).
constexpr double kBeta = 0.04;
constexpr double kAlpha = 0.2 - 0.75 * kBeta;
constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;

double scaled_rms(const State& v, const State& a, const State& b, const AdaptiveOptions& o) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double sc = o.atol + o.rtol * std::max(std::abs(a[i]), std::abs(b[i]));
    const double r = v[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(v.size(), 1)));
}

}  // namespace

AdaptiveResult integrate_dopri5(const OdeField& f, State x0, double t0, double t1,
                                const AdaptiveOptions& options, const OdeObserver& observer) {
  if (!(options.rtol > 0.0) || !(options.atol > 0.0)) {
    throw ParameterError("adaptive tolerances must be positive");
  }
  AdaptiveResult result;
  result.state = std::move(x0);
  if (observer) observer(t0, result.state);
  if (t0 == t1) return result;

  const double direction = (t1 > t0) ? 1.0 : -1.0;
  const Eigen::Index dim = result.state.size();
  State& x = result.state;
  State k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), stage(dim), x_new(dim),
      err(dim);

  auto eval = [&](double t, const State& at, State& out) {
    f(t, at, out);
    ++result.evaluations;
  };

  double t = t0;
  eval(t, x, k1);

  double h = std::abs(options.initial_step);
  if (h == 0.0) {
    // Starting step from the local scale of x and its derivatives.
    const State zero = State::Zero(dim);
    const double d0 = scaled_rms(x, x, zero, options);
    const double d1 = scaled_rms(k1, x, zero, options);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, std::abs(t1 - t0));
    stage = x + direction * h0 * k1;
    eval(t + direction * h0, stage, k2);
    const double d2 = scaled_rms(State(k2 - k1), x, zero, options) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = (dmax <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    h = std::min(100.0 * h0, h1);
  }

  double previous_error = 1e-4;
  bool last_rejected = false;
  while (direction * (t1 - t) > 0.0) {
    if (result.accepted + result.rejected >= options.max_steps) {
      throw StiffnessError("adaptive integrator exceeded its step budget");
    }
    if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1.0)) {
      std::ostringstream os;
      os << "adaptive step size underflow at t = " << t << " (h = " << h << ")";
      throw StiffnessError(os.str());
    }
    const bool final_step = h >= std::abs(t1 - t);
    const double hs = final_step ? (t1 - t) : direction * h;

    stage = x + hs * (a21 * k1);
    eval(t + c2 * hs, stage, k2);
    stage = x + hs * (a31 * k1 + a32 * k2);
    eval(t + c3 * hs, stage, k3);
    stage = x + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    eval(t + c4 * hs, stage, k4);
    stage = x + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    eval(t + c5 * hs, stage, k5);
    stage = x + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    eval(t + hs, stage, k6);
    x_new = x + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const double t_new = final_step ? t1 : t + hs;
    eval(t_new, x_new, k7);
    err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double error = scaled_rms(err, x, x_new, options);

    if (!std::isfinite(error)) {
      if (!x_new.allFinite()) throw DivergenceError(result.accepted + 1, t_new);
    }

    if (error <= 1.0) {
      double factor = (error == 0.0)
                          ? kMaxFactor
                          : kSafety * std::pow(error, -kAlpha) * std::pow(previous_error, kBeta);
      factor = std::clamp(factor, kMinFactor, kMaxFactor);
      if (last_rejected) factor = std::min(factor, 1.0);
      previous_error = std::max(error, 1e-4);
      last_rejected = false;
      t = t_new;
      x.swap(x_new);
      k1.swap(k7);
      ++result.accepted;
      if (!x.allFinite()) throw DivergenceError(result.accepted, t);
      if (observer) observer(t, x);
      h = std::abs(hs) * factor;
    } else {
      const double factor =
          std::isfinite(error) ? std::max(kMinFactor, kSafety * std::pow(error, -kAlpha))
                               : kMinFactor;
      last_rejected = true;
      ++result.rejected;
      h = std::abs(hs) * factor;
    }
  }
  return result;
}

}  // namespace isde
