#include "isde/solvers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "isde/adaptive.hpp"
#include "isde/errors.hpp"

namespace isde {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void check_kappa(double kappa) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) {
    std::ostringstream os;
    os << "kappa must lie in [0, 1] (got " << kappa << ")";
    throw ParameterError(os.str());
  }
}

void check_inputs(const InterpolatingSde& sde, const TimeGrid& grid, const State& y,
                  const State& x_start) {
  check_same_dimension(x_start, y, "solver start state");
  if (!x_start.allFinite()) throw ParameterError("solver start state must be finite");
  grid.check_against(sde);
}

void check_finite(const State& x, std::size_t step, double t) {
  if (!x.allFinite()) throw DivergenceError(step, t);
}

// Records the trajectory on request and keeps the output bookkeeping in one place.
class Recorder {
 public:
  Recorder(bool enabled, SolveOutput& out) : enabled_(enabled), out_(out) {}
  void operator()(double t, const State& x) {
    if (enabled_) out_.trajectory.push_back({t, x});
  }

 private:
  bool enabled_;
  SolveOutput& out_;
};

SolveOutput isde_solve_impl(const IsdePlan& plan, const CountedField& model, double sign,
                            const State& y, const State& x_start, const SolverSpec& spec,
                            Rng& rng) {
  check_kappa(spec.kappa);
  check_same_dimension(x_start, y, "isde_solve start state");
  if (!x_start.allFinite()) throw ParameterError("solver start state must be finite");

  SolveOutput out;
  out.seed = rng.seed();
  Recorder record(spec.record_trajectory, out);

  const Eigen::Index dim = x_start.size();
  State x = x_start;
  State m1(dim), m_mid(dim), x_mid(dim), slope(dim), z(dim);
  const double noise_scale = 1.0 + spec.kappa * spec.kappa;
  std::uint64_t nfe = 0;

  if (!plan.steps().empty()) record(plan.steps().front().t_from, x);
  std::size_t index = 0;
  for (const IsdeStep& s : plan.steps()) {
    ++index;
    model.evaluate_into(x, y, s.t_from, m1);
    ++nfe;
    if (plan.order() == 1) {
      x = s.transport * x + (1.0 - s.transport) * y + (sign * noise_scale * s.keep_to * s.w0) * m1;
    } else {
      x_mid = s.transport_mid * x + (1.0 - s.transport_mid) * y + (sign * s.keep_mid * s.w0_mid) * m1;
      model.evaluate_into(x_mid, y, s.t_mid, m_mid);
      ++nfe;
      if (spec.derivative == DerivativeRule::kForwardDifference) {
        slope = (m_mid - m1) / (s.t_mid - s.t_from);
      } else {
        slope = (m1 - m_mid) / (2.0 * (s.t_from - s.t_to));
      }
      x = s.transport * x + (1.0 - s.transport) * y +
          (sign * noise_scale * s.keep_to) * (s.w0 * m1 + s.w1 * slope);
    }
    rng.fill_gaussian(z);
    if (spec.kappa > 0.0) x += (spec.kappa * s.ito) * z;
    check_finite(x, index, s.t_to);
    record(s.t_to, x);
  }
  out.final_state = std::move(x);
  out.nfe = nfe;
  out.steps = plan.steps().size();
  return out;
}

}  // namespace

std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::kEulerMaruyama: return "eum";
    case SolverKind::kPredictorCorrector: return "pc";
    case SolverKind::kRk2Midpoint: return "rk2";
    case SolverKind::kRk45Adaptive: return "rk45";
    case SolverKind::kIsde: return "isde";
  }
  return "unknown";
}

SolverKind solver_kind_from_string(std::string_view name) {
  const std::string n = lower(name);
  if (n == "eum" || n == "euler_maruyama" || n == "euler-maruyama") {
    return SolverKind::kEulerMaruyama;
  }
  if (n == "pc" || n == "predictor_corrector" || n == "predictor-corrector") {
    return SolverKind::kPredictorCorrector;
  }
  if (n == "rk2" || n == "midpoint" || n == "rk2_midpoint") return SolverKind::kRk2Midpoint;
  if (n == "rk45" || n == "rk45_adaptive" || n == "dopri5") return SolverKind::kRk45Adaptive;
  if (n == "isde") return SolverKind::kIsde;
  throw ParameterError("unknown solver kind '" + std::string(name) + "'");
}

SolverSpec SolverSpec::isde(int order, double kappa) {
  SolverSpec s;
  s.kind = SolverKind::kIsde;
  s.order = order;
  s.kappa = kappa;
  return s;
}

SolverSpec SolverSpec::euler_maruyama(double kappa) {
  SolverSpec s;
  s.kind = SolverKind::kEulerMaruyama;
  s.kappa = kappa;
  return s;
}

SolverSpec SolverSpec::predictor_corrector(double snr) {
  SolverSpec s;
  s.kind = SolverKind::kPredictorCorrector;
  s.kappa = 1.0;
  s.corrector_snr = snr;
  return s;
}

SolverSpec SolverSpec::rk2_midpoint() {
  SolverSpec s;
  s.kind = SolverKind::kRk2Midpoint;
  return s;
}

SolverSpec SolverSpec::rk45(double rtol, double atol) {
  SolverSpec s;
  s.kind = SolverKind::kRk45Adaptive;
  s.rtol = rtol;
  s.atol = atol;
  return s;
}

void SolverSpec::validate() const {
  check_kappa(kappa);
  if (kind == SolverKind::kIsde && order != 1 && order != 2) {
    throw ParameterError("iSDE solver order must be 1 or 2");
  }
  if (kind == SolverKind::kPredictorCorrector && !(corrector_snr >= 0.0)) {
    throw ParameterError("corrector step size must be nonnegative");
  }
  if (kind == SolverKind::kRk45Adaptive && !(rtol > 0.0 && atol > 0.0)) {
    throw ParameterError("RK45 tolerances must be positive");
  }
}

std::size_t SolverSpec::nfe_per_step() const {
  switch (kind) {
    case SolverKind::kEulerMaruyama: return 1;
    case SolverKind::kPredictorCorrector: return 2;
    case SolverKind::kRk2Midpoint: return 2;
    case SolverKind::kRk45Adaptive: return 0;
    case SolverKind::kIsde: return static_cast<std::size_t>(order);
  }
  return 0;
}

std::string SolverSpec::label() const {
  switch (kind) {
    case SolverKind::kEulerMaruyama: return "EuM-k" + format_number(kappa);
    case SolverKind::kPredictorCorrector: return "PC-r" + format_number(corrector_snr);
    case SolverKind::kRk2Midpoint: return "RK2";
    case SolverKind::kRk45Adaptive: return "RK45";
    case SolverKind::kIsde:
      return "iSDE-" + std::to_string(order) + "S-k" + format_number(kappa) +
             (derivative == DerivativeRule::kQuarterDifference ? "-quarter" : "");
  }
  return "unknown";
}

State reverse_init(const InterpolatingSde& sde, const State& y, Rng& rng) {
  const double sigma = sde.sigma(sde.t_rev());
  State z = rng.gaussian_vector(y.size());
  if (sigma == 0.0) return y;
  return y + sigma * z;
}

State linear_step(const InterpolatingSde& sde, const State& x, const State& y, double t_from,
                  double t_to) {
  check_same_dimension(x, y, "linear_step");
  if (t_to > t_from) throw ParameterError("linear_step integrates backwards: t_to <= t_from");
  const double from = sde.one_minus_k(t_from);
  if (!(from > 0.0)) throw SingularityError("linear_step: k(t_from) reached 1");
  const double ratio = sde.one_minus_k(t_to) / from;
  return ratio * x + (1.0 - ratio) * y;
}

void reverse_drift(const InterpolatingSde& sde, const ScoreModel& score, const State& x,
                   const State& y, double t, double kappa, State& out) {
  score.evaluate_into(x, y, t, out);
  const double c = 0.5 * (1.0 + kappa * kappa) * sde.g_squared(t);
  out = sde.gamma(t) * (y - x) - c * out;
}

IsdePlan IsdePlan::build(const InterpolatingSde& sde, const TimeGrid& grid, int order,
                         Prediction prediction, WeightMethod method) {
  if (order != 1 && order != 2) throw ParameterError("iSDE solver order must be 1 or 2");
  grid.check_against(sde);
  IsdePlan plan;
  plan.order_ = order;
  plan.prediction_ = prediction;
  auto weight = [&](int n, double a, double b) {
    return prediction == Prediction::kScore ? omega_weight(sde, n, a, b, method)
                                            : noise_omega_weight(sde, n, a, b, method);
  };
  const auto& nodes = grid.nodes();
  plan.steps_.reserve(grid.steps());
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    IsdeStep s;
    s.t_from = nodes[i];
    s.t_to = nodes[i + 1];
    s.t_mid = 0.5 * (s.t_from + s.t_to);
    const double from = sde.one_minus_k(s.t_from);
    if (!(from > 0.0)) throw SingularityError("iSDE plan: k(t) reached 1 on the grid");
    s.keep_to = sde.one_minus_k(s.t_to);
    s.transport = s.keep_to / from;
    s.w0 = weight(0, s.t_from, s.t_to);
    if (order == 2) {
      s.w1 = weight(1, s.t_from, s.t_to);
      s.keep_mid = sde.one_minus_k(s.t_mid);
      s.transport_mid = s.keep_mid / from;
      s.w0_mid = weight(0, s.t_from, s.t_mid);
    }
    s.ito = ito_increment(sde, s.t_from, s.t_to, method);
    plan.steps_.push_back(s);
  }
  return plan;
}

SolveOutput isde_solve(const IsdePlan& plan, const ScoreModel& score, const State& y,
                       const State& x_start, const SolverSpec& spec, Rng& rng) {
  if (plan.prediction() != Prediction::kScore) {
    throw ParameterError("plan was built for a noise model");
  }
  return isde_solve_impl(plan, score, -1.0, y, x_start, spec, rng);
}

SolveOutput isde_solve(const IsdePlan& plan, const NoiseModel& noise, const State& y,
                       const State& x_start, const SolverSpec& spec, Rng& rng) {
  if (plan.prediction() != Prediction::kNoise) {
    throw ParameterError("plan was built for a score model");
  }
  return isde_solve_impl(plan, noise, 1.0, y, x_start, spec, rng);
}

SolveOutput isde_solve(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                       const State& x_start, const TimeGrid& grid, const SolverSpec& spec,
                       Rng& rng) {
  spec.validate();
  check_inputs(sde, grid, y, x_start);
  const IsdePlan plan = IsdePlan::build(sde, grid, spec.order, Prediction::kScore, spec.weights);
  return isde_solve(plan, score, y, x_start, spec, rng);
}

SolveOutput isde_solve(const InterpolatingSde& sde, const NoiseModel& noise, const State& y,
                       const State& x_start, const TimeGrid& grid, const SolverSpec& spec,
                       Rng& rng) {
  spec.validate();
  check_inputs(sde, grid, y, x_start);
  const IsdePlan plan = IsdePlan::build(sde, grid, spec.order, Prediction::kNoise, spec.weights);
  return isde_solve(plan, noise, y, x_start, spec, rng);
}

SolveOutput isde_solve(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                       const TimeGrid& grid, const SolverSpec& spec, Rng& rng) {
  const State x_start = reverse_init(sde, y, rng);
  return isde_solve(sde, score, y, x_start, grid, spec, rng);
}

SolveOutput euler_maruyama(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                           const State& x_start, const TimeGrid& grid, double kappa, Rng& rng,
                           bool record_trajectory) {
  check_kappa(kappa);
  check_inputs(sde, grid, y, x_start);
  SolveOutput out;
  out.seed = rng.seed();
  Recorder record(record_trajectory, out);
  const Eigen::Index dim = x_start.size();
  State x = x_start;
  State s(dim), z(dim);
  const double drift_scale = 0.5 * (1.0 + kappa * kappa);
  const auto& nodes = grid.nodes();
  record(nodes.front(), x);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double t = nodes[i];
    const double dt = nodes[i + 1] - t;  // negative
    score.evaluate_into(x, y, t, s);
    ++out.nfe;
    const double g2 = sde.g_squared(t);
    x += (sde.gamma(t) * dt) * (y - x) - (drift_scale * g2 * dt) * s;
    rng.fill_gaussian(z);
    if (kappa > 0.0) x += (kappa * std::sqrt(g2 * -dt)) * z;
    check_finite(x, i + 1, nodes[i + 1]);
    record(nodes[i + 1], x);
  }
  out.final_state = std::move(x);
  out.steps = grid.steps();
  return out;
}

SolveOutput pc_sampler(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                       const State& x_start, const TimeGrid& grid, double corrector_snr,
                       Rng& rng, bool record_trajectory) {
  if (!(corrector_snr >= 0.0)) throw ParameterError("corrector step size must be nonnegative");
  check_inputs(sde, grid, y, x_start);
  SolveOutput out;
  out.seed = rng.seed();
  Recorder record(record_trajectory, out);
  const Eigen::Index dim = x_start.size();
  State x = x_start;
  State s(dim), z(dim);
  const auto& nodes = grid.nodes();
  record(nodes.front(), x);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double t = nodes[i];
    const double t_next = nodes[i + 1];
    const double dt = t_next - t;
    // Predictor: reverse SDE, kappa = 1.
    score.evaluate_into(x, y, t, s);
    const double g2 = sde.g_squared(t);
    x += (sde.gamma(t) * dt) * (y - x) - (g2 * dt) * s;
    rng.fill_gaussian(z);
    x += std::sqrt(g2 * -dt) * z;
    // Corrector: one Langevin step at t_next.
    score.evaluate_into(x, y, t_next, s);
    out.nfe += 2;
    const double scaled = corrector_snr * sde.sigma(t_next);
    const double eta = 2.0 * scaled * scaled;
    if (eta > 0.0) {
      x += eta * s;
      rng.fill_gaussian(z);
      x += std::sqrt(2.0 * eta) * z;
    }
    check_finite(x, i + 1, t_next);
    record(t_next, x);
  }
  out.final_state = std::move(x);
  out.steps = grid.steps();
  return out;
}

SolveOutput rk2_midpoint(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                         const State& x_start, const TimeGrid& grid, bool record_trajectory) {
  check_inputs(sde, grid, y, x_start);
  SolveOutput out;
  Recorder record(record_trajectory, out);
  const Eigen::Index dim = x_start.size();
  State x = x_start;
  State k1(dim), k2(dim), x_mid(dim);
  const auto& nodes = grid.nodes();
  record(nodes.front(), x);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double t = nodes[i];
    const double h = nodes[i + 1] - t;
    reverse_drift(sde, score, x, y, t, 0.0, k1);
    x_mid = x + (0.5 * h) * k1;
    reverse_drift(sde, score, x_mid, y, t + 0.5 * h, 0.0, k2);
    out.nfe += 2;
    x += h * k2;
    check_finite(x, i + 1, nodes[i + 1]);
    record(nodes[i + 1], x);
  }
  out.final_state = std::move(x);
  out.steps = grid.steps();
  return out;
}

SolveOutput rk45_adaptive(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                          const State& x_start, double t_start, double t_end, double rtol,
                          double atol, bool record_trajectory) {
  check_same_dimension(x_start, y, "rk45_adaptive start state");
  if (!(t_end < t_start)) throw ParameterError("rk45_adaptive integrates backwards: t_end < t_start");
  if (!(rtol > 0.0 && atol > 0.0)) throw ParameterError("RK45 tolerances must be positive");
  if (t_start > sde.t_rev() * (1.0 + 1e-12)) {
    throw ParameterError("rk45_adaptive must start at or before the reverse start T");
  }
  SolveOutput out;
  Recorder record(record_trajectory, out);
  OdeField field = [&](double t, const State& x, State& dxdt) {
    reverse_drift(sde, score, x, y, t, 0.0, dxdt);
  };
  OdeObserver observer;
  if (record_trajectory) observer = [&](double t, const State& x) { record(t, x); };
  AdaptiveOptions options;
  options.rtol = rtol;
  options.atol = atol;
  AdaptiveResult r = integrate_dopri5(field, x_start, t_start, t_end, options, observer);
  out.final_state = std::move(r.state);
  out.nfe = r.evaluations;
  out.steps = r.accepted;
  out.rejected_steps = r.rejected;
  return out;
}

SolveOutput solve(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                  const State& x_start, const TimeGrid& grid, const SolverSpec& spec, Rng& rng) {
  spec.validate();
  switch (spec.kind) {
    case SolverKind::kIsde:
      return isde_solve(sde, score, y, x_start, grid, spec, rng);
    case SolverKind::kEulerMaruyama:
      return euler_maruyama(sde, score, y, x_start, grid, spec.kappa, rng,
                            spec.record_trajectory);
    case SolverKind::kPredictorCorrector:
      return pc_sampler(sde, score, y, x_start, grid, spec.corrector_snr, rng,
                        spec.record_trajectory);
    case SolverKind::kRk2Midpoint: {
      SolveOutput out = rk2_midpoint(sde, score, y, x_start, grid, spec.record_trajectory);
      out.seed = rng.seed();
      return out;
    }
    case SolverKind::kRk45Adaptive: {
      SolveOutput out = rk45_adaptive(sde, score, y, x_start, grid.start(), grid.stop(),
                                      spec.rtol, spec.atol, spec.record_trajectory);
      out.seed = rng.seed();
      return out;
    }
  }
  throw ParameterError("unknown solver kind");
}

}  // namespace isde
