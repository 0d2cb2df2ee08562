#include "isde/harness/studies.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "isde/errors.hpp"
#include "isde/score.hpp"
#include "isde/version.hpp"
#include "isde/weights.hpp"

namespace isde::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

bool is_stochastic(const SolverSpec& spec) {
  return spec.kind == SolverKind::kPredictorCorrector ||
         ((spec.kind == SolverKind::kIsde || spec.kind == SolverKind::kEulerMaruyama) &&
          spec.kappa > 0.0);
}

void require_solvers(const ExperimentConfig& c, const char* study) {
  if (c.solvers.empty()) throw ConfigError(std::string(study) + ": solver list is empty");
}

void require_reference_prior(const ExperimentConfig& c, const char* study) {
  if (c.prior.kind() == PriorKind::kMixture) {
    throw ConfigError(std::string(study) + ": needs a Gaussian or Delta prior");
  }
}

// Mean and pooled per-component variance of the marginal p_t(x | y).
struct Moments {
  State mean;
  double variance = 0.0;
};

Moments marginal_moments(const ToyPrior& prior, const InterpolatingSde& sde, const State& y,
                         double t) {
  const auto comps = marginal_components(prior, sde, y, t);
  Moments m;
  m.mean = State::Zero(y.size());
  for (const auto& c : comps) m.mean += c.weight * c.mean;
  State second = State::Zero(y.size());
  for (const auto& c : comps) {
    second += c.weight * (c.mean.array().square() + c.variance).matrix();
  }
  m.variance = (second.array() - m.mean.array().square()).mean();
  return m;
}

State start_state(const ExperimentConfig& c, InitMode mode, const InterpolatingSde& sde,
                  Rng& rng) {
  switch (mode) {
    case InitMode::kFixed: return *c.x_T;
    case InitMode::kMarginal: return sample_marginal(c.prior, sde, c.y, sde.t_rev(), rng);
    case InitMode::kObservation: return reverse_init(sde, c.y, rng);
  }
  throw ConfigError("unknown init mode");
}

// The start of deterministic runs: x_T if configured, else one draw from substream 0.
State deterministic_start(const ExperimentConfig& c, const InterpolatingSde& sde) {
  Rng rng(substream_seed(c.seed, 0));
  return start_state(c, c.x_T ? InitMode::kFixed : c.init, sde, rng);
}

double endpoint_error(const State& x, const State& reference) {
  return (x - reference).lpNorm<Eigen::Infinity>();
}

// A solver bound to one SDE, score and grid; iSDE weights are computed once.
class PreparedSolver {
 public:
  PreparedSolver(const SolverConfig& config, const InterpolatingSde& sde, const ScoreModel& score,
                 TimeGrid grid)
      : config_(config), sde_(sde), score_(score), eps_(score, sde), grid_(std::move(grid)) {
    if (config_.spec.kind == SolverKind::kIsde) {
      plan_ = IsdePlan::build(sde_, grid_, config_.spec.order, config_.prediction,
                              config_.spec.weights);
    }
  }

  SolveOutput run(const State& y, const State& x_start, Rng& rng) const {
    if (plan_) {
      if (config_.prediction == Prediction::kNoise) {
        return isde_solve(*plan_, eps_, y, x_start, config_.spec, rng);
      }
      return isde_solve(*plan_, score_, y, x_start, config_.spec, rng);
    }
    return solve(sde_, score_, y, x_start, grid_, config_.spec, rng);
  }

  const TimeGrid& grid() const noexcept { return grid_; }

 private:
  const SolverConfig& config_;
  const InterpolatingSde& sde_;
  const ScoreModel& score_;
  EpsAdapter eps_;
  TimeGrid grid_;
  std::optional<IsdePlan> plan_;
};

TimeGrid grid_for(const SolverConfig& s, const InterpolatingSde& sde, std::size_t steps) {
  // The adaptive solver only reads the endpoints.
  if (s.spec.kind == SolverKind::kRk45Adaptive) return TimeGrid::uniform(sde, 1);
  return TimeGrid::uniform(sde, steps);
}

Table timing_table() { return Table({"study", "solver", "kappa", "steps", "nfe", "runtime_s"}); }

// Final states of n trajectories with per-trajectory substreams.
std::vector<State> run_trajectories(const ExperimentConfig& c, InitMode mode,
                                    const PreparedSolver& solver, const InterpolatingSde& sde,
                                    std::size_t n, std::uint64_t* nfe_total) {
  std::vector<State> finals;
  finals.reserve(n);
  std::uint64_t nfe = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(substream_seed(c.seed, i));
    const State x0 = start_state(c, mode, sde, rng);
    SolveOutput out = solver.run(c.y, x0, rng);
    nfe += out.nfe;
    finals.push_back(std::move(out.final_state));
  }
  if (nfe_total) *nfe_total = nfe;
  return finals;
}

void add_sample_warning(StudyResult& r, std::size_t n) {
  if (n < 100) {
    r.warnings.push_back("n_trajectories = " + std::to_string(n) +
                         " < 100: distribution statistics have little power");
  }
}

}  // namespace

State reference_solution(const InterpolatingSde& sde, const ToyPrior& prior, const State& y,
                         const State& x_T, double t_start, double t_end) {
  check_same_dimension(x_T, y, "reference_solution");
  const GaussianComponent from = gaussian_marginal(prior, sde, y, t_start);
  const GaussianComponent to = gaussian_marginal(prior, sde, y, t_end);
  if (!(from.variance > 0.0)) {
    throw SingularityError("reference_solution: marginal variance vanishes at the start time");
  }
  return to.mean + (x_T - from.mean) * std::sqrt(to.variance / from.variance);
}

State reference_solution(const InterpolatingSde& sde, const ToyPrior& prior, const State& y,
                         const State& x_T) {
  return reference_solution(sde, prior, y, x_T, sde.t_rev(), sde.delta());
}

double ks_statistic(std::vector<double> sample, double mean, double variance) {
  if (sample.empty()) return 0.0;
  if (!(variance > 0.0)) throw ParameterError("ks_statistic: variance must be positive");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  const double scale = std::sqrt(2.0 * variance);
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double cdf = 0.5 * std::erfc(-(sample[i] - mean) / scale);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  return d;
}

double ks_critical_value_1pct(std::size_t n) {
  return 1.628 / std::sqrt(static_cast<double>(n));
}

SampleStats sample_stats(const std::vector<State>& samples, const State& target_mean,
                         double target_variance) {
  SampleStats s;
  s.n = samples.size();
  if (s.n == 0) return s;
  const Eigen::Index dim = target_mean.size();
  State mean = State::Zero(dim);
  for (const State& x : samples) mean += x;
  mean /= static_cast<double>(s.n);
  State sq = State::Zero(dim);
  for (const State& x : samples) sq += (x - mean).array().square().matrix();
  const double denom = s.n > 1 ? static_cast<double>(s.n - 1) : 1.0;
  s.mean = mean.mean();
  s.variance = (sq / denom).mean();
  s.mean_deviation = (mean - target_mean).lpNorm<Eigen::Infinity>();
  s.mean_standard_error = std::sqrt(target_variance / static_cast<double>(s.n));
  s.variance_relative_deviation = std::abs(s.variance - target_variance) / target_variance;
  if (dim == 1 && target_variance > 0.0) {
    std::vector<double> xs;
    xs.reserve(s.n);
    for (const State& x : samples) xs.push_back(x[0]);
    s.ks_statistic = ks_statistic(std::move(xs), target_mean[0], target_variance);
  }
  return s;
}

double loglog_slope(const std::vector<double>& h, const std::vector<double>& error) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  double n = 0.0;
  for (std::size_t i = 0; i < std::min(h.size(), error.size()); ++i) {
    if (!(std::isfinite(error[i]) && error[i] > 0.0 && h[i] > 0.0)) continue;
    const double x = std::log(h[i]);
    const double y = std::log(error[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    n += 1.0;
  }
  if (n < 2.0) return kNaN;
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return kNaN;
  return (n * sxy - sx * sy) / den;
}

StudyResult simulate_forward(const ExperimentConfig& c) {
  StudyResult r;
  r.study = "simulate-forward";
  r.table = Table({"t", "n", "mean", "variance", "target_mean", "target_variance",
                   "mean_deviation", "mean_standard_error", "variance_relative_deviation", "ks"});
  r.timing = timing_table();
  const InterpolatingSde sde(c.sde);
  std::vector<double> times = c.forward.times;
  if (times.empty()) times.push_back(sde.t_rev());
  add_sample_warning(r, c.n_trajectories);
  for (double t : times) {
    const auto start = Clock::now();
    std::vector<State> xs;
    xs.reserve(c.n_trajectories);
    for (std::size_t i = 0; i < c.n_trajectories; ++i) {
      Rng rng(substream_seed(c.seed, i));
      xs.push_back(sample_marginal(c.prior, sde, c.y, t, rng));
    }
    const Moments target = marginal_moments(c.prior, sde, c.y, t);
    SampleStats s = sample_stats(xs, target.mean, target.variance);
    if (c.prior.kind() == PriorKind::kMixture) s.ks_statistic = -1.0;
    r.table.add_row({t, as_int(s.n), s.mean, s.variance, target.mean.mean(), target.variance,
                     s.mean_deviation, s.mean_standard_error, s.variance_relative_deviation,
                     s.ks_statistic});
    r.timing.add_row({r.study, std::string("forward"), 0.0, std::int64_t{0}, std::int64_t{0},
                      seconds_since(start)});
  }
  return r;
}

StudyResult solve_study(const ExperimentConfig& c) {
  require_solvers(c, "solve");
  StudyResult r;
  r.study = "solve";
  const InterpolatingSde sde(c.sde);
  const AnalyticScore score(c.prior, sde);
  std::vector<std::string> header{"solver", "trajectory", "t", "nfe"};
  for (Eigen::Index i = 0; i < c.y.size(); ++i) header.push_back("x" + std::to_string(i));
  r.table = Table(header);
  r.timing = timing_table();
  for (const SolverConfig& s : c.solvers) {
    const std::size_t steps = s.spec.kind == SolverKind::kRk45Adaptive ? 1 : s.resolve_steps();
    const PreparedSolver solver(s, sde, score, grid_for(s, sde, steps));
    const auto start = Clock::now();
    std::uint64_t nfe_total = 0;
    for (std::size_t i = 0; i < c.n_trajectories; ++i) {
      Rng rng(substream_seed(c.seed, i));
      const State x0 = start_state(c, c.init, sde, rng);
      const SolveOutput out = solver.run(c.y, x0, rng);
      nfe_total += out.nfe;
      auto emit = [&](double t, const State& x) {
        std::vector<Cell> row{s.label(), as_int(i), t, static_cast<std::int64_t>(out.nfe)};
        for (Eigen::Index d = 0; d < x.size(); ++d) row.push_back(x[d]);
        r.table.add_row(std::move(row));
      };
      if (out.trajectory.empty()) {
        emit(sde.delta(), out.final_state);
      } else {
        for (const TrajectoryPoint& p : out.trajectory) emit(p.t, p.x);
      }
    }
    r.timing.add_row({r.study, s.label(), s.spec.kappa, as_int(steps),
                      static_cast<std::int64_t>(nfe_total), seconds_since(start)});
  }
  return r;
}

StudyResult convergence_study(const ExperimentConfig& c) {
  require_solvers(c, "convergence");
  require_reference_prior(c, "convergence");
  for (const SolverConfig& s : c.solvers) {
    if (is_stochastic(s.spec) || s.spec.kind == SolverKind::kRk45Adaptive) {
      throw ConfigError("convergence: " + s.label() +
                        " is not a deterministic fixed-step solver (use kappa = 0)");
    }
  }
  StudyResult r;
  r.study = "convergence";
  r.table = Table({"solver", "kappa", "steps", "h", "nfe", "error", "status"});
  r.timing = timing_table();
  const InterpolatingSde sde(c.sde);
  const AnalyticScore score(c.prior, sde);
  const State x_T = deterministic_start(c, sde);
  const State reference = reference_solution(sde, c.prior, c.y, x_T);

  for (const SolverConfig& s : c.solvers) {
    std::vector<double> hs, errors;
    for (std::size_t m : c.convergence.steps) {
      const TimeGrid grid = TimeGrid::uniform(sde, m);
      const double h = (grid.start() - grid.stop()) / static_cast<double>(m);
      const auto start = Clock::now();
      double error = kNaN;
      std::uint64_t nfe = 0;
      std::string status = "ok";
      try {
        const PreparedSolver solver(s, sde, score, grid);
        Rng rng(substream_seed(c.seed, 0));
        const SolveOutput out = solver.run(c.y, x_T, rng);
        nfe = out.nfe;
        error = endpoint_error(out.final_state, reference);
        if (!std::isfinite(error)) status = "diverged";
      } catch (const DivergenceError&) {
        status = "diverged";
      }
      hs.push_back(h);
      errors.push_back(error);
      r.table.add_row({s.label(), s.spec.kappa, as_int(m), h, static_cast<std::int64_t>(nfe),
                       error, status});
      r.timing.add_row({r.study, s.label(), s.spec.kappa, as_int(m),
                        static_cast<std::int64_t>(nfe), seconds_since(start)});
    }
    r.slopes[s.label()] = loglog_slope(hs, errors);
  }
  return r;
}

StudyResult nfe_sweep(const ExperimentConfig& c) {
  require_solvers(c, "nfe-sweep");
  require_reference_prior(c, "nfe-sweep");
  // Reject inconsistent budgets before spending any time.
  for (const SolverConfig& s : c.solvers) {
    if (s.spec.kind == SolverKind::kRk45Adaptive) continue;
    for (std::size_t b : c.nfe_sweep.budgets) steps_for_budget(s, b);
  }
  StudyResult r;
  r.study = "nfe-sweep";
  r.table = Table({"solver", "kappa", "budget", "steps", "nfe", "metric", "error",
                   "mean_deviation", "variance_relative_deviation", "status"});
  r.timing = timing_table();
  const InterpolatingSde sde(c.sde);
  const AnalyticScore score(c.prior, sde);
  const State x_T = deterministic_start(c, sde);
  const State reference = reference_solution(sde, c.prior, c.y, x_T);
  const Moments target = marginal_moments(c.prior, sde, c.y, sde.delta());

  auto run_row = [&](const SolverConfig& s, std::int64_t budget, std::size_t steps) {
    const auto start = Clock::now();
    const PreparedSolver solver(s, sde, score, grid_for(s, sde, steps));
    std::uint64_t nfe = 0;
    std::size_t reported_steps = steps;
    std::string status = "ok";
    if (!is_stochastic(s.spec)) {
      double error = kNaN;
      try {
        Rng rng(substream_seed(c.seed, 0));
        const SolveOutput out = solver.run(c.y, x_T, rng);
        nfe = out.nfe;
        reported_steps = out.steps;
        error = endpoint_error(out.final_state, reference);
      } catch (const DivergenceError&) {
        status = "diverged";
      }
      r.table.add_row({s.label(), s.spec.kappa, budget, as_int(reported_steps),
                       static_cast<std::int64_t>(nfe), std::string("endpoint"), error, kNaN, kNaN,
                       status});
    } else {
      // Distribution rows always start from exact marginal draws at T.
      std::uint64_t total = 0;
      SampleStats st;
      try {
        const auto finals =
            run_trajectories(c, InitMode::kMarginal, solver, sde, c.n_trajectories, &total);
        st = sample_stats(finals, target.mean, target.variance);
        nfe = total / c.n_trajectories;
      } catch (const DivergenceError&) {
        status = "diverged";
        st.mean_deviation = st.variance_relative_deviation = kNaN;
      }
      r.table.add_row({s.label(), s.spec.kappa, budget, as_int(steps),
                       static_cast<std::int64_t>(nfe), std::string("distribution"),
                       st.mean_deviation, st.mean_deviation, st.variance_relative_deviation,
                       status});
    }
    r.timing.add_row({r.study, s.label(), s.spec.kappa, as_int(reported_steps),
                      static_cast<std::int64_t>(nfe), seconds_since(start)});
  };

  bool any_stochastic = false;
  for (const SolverConfig& s : c.solvers) {
    any_stochastic = any_stochastic || is_stochastic(s.spec);
    if (s.spec.kind == SolverKind::kRk45Adaptive) {
      run_row(s, -1, 0);
      continue;
    }
    for (std::size_t b : c.nfe_sweep.budgets) run_row(s, as_int(b), steps_for_budget(s, b));
  }
  if (any_stochastic) add_sample_warning(r, c.n_trajectories);
  return r;
}

StudyResult kappa_sweep(const ExperimentConfig& c) {
  const KappaSweepOptions& o = c.kappa_sweep;
  SolverConfig base;
  base.spec = SolverSpec::isde(o.order, 0.0);
  const std::size_t steps = steps_for_budget(base, o.nfe);

  StudyResult r;
  r.study = "kappa-sweep";
  r.table = Table({"kappa", "steps", "nfe", "n", "mean", "variance", "target_mean",
                   "target_variance", "mean_deviation", "variance_relative_deviation",
                   "residual_variance"});
  r.timing = timing_table();
  add_sample_warning(r, c.n_trajectories);

  const InterpolatingSde sde(c.sde);
  const AnalyticScore score(c.prior, sde);
  const IsdePlan plan = IsdePlan::build(sde, TimeGrid::uniform(sde, steps), o.order);
  const Moments target = marginal_moments(c.prior, sde, c.y, sde.delta());
  const std::size_t n = c.n_trajectories;

  auto run_all = [&](double kappa, std::uint64_t* nfe_total) {
    const SolverSpec spec = SolverSpec::isde(o.order, kappa);
    std::vector<State> finals;
    finals.reserve(n);
    std::uint64_t nfe = 0;
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(substream_seed(c.seed, i));
      const State x0 = start_state(c, c.init, sde, rng);
      SolveOutput out = isde_solve(plan, score, c.y, x0, spec, rng);
      nfe += out.nfe;
      finals.push_back(std::move(out.final_state));
    }
    if (nfe_total) *nfe_total = nfe;
    return finals;
  };

  // Same substreams for every kappa, so the start states coincide and the
  // residual against kappa = 0 isolates the injected noise.
  const std::vector<State> deterministic = run_all(0.0, nullptr);
  for (double kappa : o.kappas) {
    const auto start = Clock::now();
    std::uint64_t nfe_total = 0;
    const std::vector<State> finals = run_all(kappa, &nfe_total);
    std::vector<State> residual(n);
    for (std::size_t i = 0; i < n; ++i) residual[i] = finals[i] - deterministic[i];
    const SampleStats st = sample_stats(finals, target.mean, target.variance);
    const SampleStats rs = sample_stats(residual, State::Zero(c.y.size()), 1.0);
    r.table.add_row({kappa, as_int(steps), static_cast<std::int64_t>(nfe_total / n), as_int(n),
                     st.mean, st.variance, target.mean.mean(), target.variance,
                     st.mean_deviation, st.variance_relative_deviation, rs.variance});
    r.timing.add_row({r.study, SolverSpec::isde(o.order, kappa).label(), kappa, as_int(steps),
                      static_cast<std::int64_t>(nfe_total), seconds_since(start)});
  }
  return r;
}

StudyResult marginal_check(const ExperimentConfig& c) {
  require_solvers(c, "marginal-check");
  if (c.n_trajectories < 1000) {
    throw ConfigError("marginal-check: n_trajectories must be at least 1000");
  }
  StudyResult r;
  r.study = "marginal-check";
  r.table = Table({"solver", "kappa", "steps", "nfe", "n", "mean", "variance", "target_mean",
                   "target_variance", "mean_z", "variance_relative_deviation", "ks",
                   "ks_critical", "pass"});
  r.timing = timing_table();
  const InterpolatingSde sde(c.sde);
  const AnalyticScore score(c.prior, sde);
  const Moments target = marginal_moments(c.prior, sde, c.y, sde.delta());
  const MarginalCheckOptions& o = c.marginal_check;

  for (const SolverConfig& s : c.solvers) {
    const std::size_t steps = s.spec.kind == SolverKind::kRk45Adaptive ? 1 : s.resolve_steps();
    const PreparedSolver solver(s, sde, score, grid_for(s, sde, steps));
    const auto start = Clock::now();
    std::uint64_t nfe_total = 0;
    const auto finals = run_trajectories(c, c.init, solver, sde, c.n_trajectories, &nfe_total);
    SampleStats st = sample_stats(finals, target.mean, target.variance);
    if (c.prior.kind() == PriorKind::kMixture) st.ks_statistic = -1.0;
    const double mean_z = st.mean_deviation / st.mean_standard_error;
    const double ks_crit = ks_critical_value_1pct(st.n);
    const bool pass = mean_z <= o.mean_standard_errors &&
                      st.variance_relative_deviation <= o.variance_relative &&
                      (st.ks_statistic < 0.0 || st.ks_statistic <= ks_crit);
    r.passed = r.passed && pass;
    r.table.add_row({s.label(), s.spec.kappa, as_int(steps),
                     static_cast<std::int64_t>(nfe_total / st.n), as_int(st.n), st.mean,
                     st.variance, target.mean.mean(), target.variance, mean_z,
                     st.variance_relative_deviation, st.ks_statistic, ks_crit,
                     std::string(pass ? "yes" : "no")});
    r.timing.add_row({r.study, s.label(), s.spec.kappa, as_int(steps),
                      static_cast<std::int64_t>(nfe_total), seconds_since(start)});
  }
  return r;
}

StudyResult verify_weights(const ExperimentConfig& c) {
  const InterpolatingSde sde(c.sde);
  if (!has_closed_form_weights(sde)) {
    throw ConfigError("verify-weights: " + std::string(to_string(sde.kind())) +
                      " has no closed-form weights to check");
  }
  StudyResult r;
  r.study = "verify-weights";
  r.table = Table({"quantity", "t_from", "t_to", "closed_form", "quadrature", "relative_error"});
  r.timing = timing_table();
  const auto start = Clock::now();
  Rng rng(c.seed);
  const bool noise = sde.kind() == SdeKind::kFOUVE;
  double worst = 0.0;
  auto emit = [&](const char* what, double a, double b, double closed, double quad) {
    const double rel = std::abs(closed - quad) / std::max(std::abs(quad), 1e-300);
    worst = std::max(worst, rel);
    r.table.add_row({std::string(what), a, b, closed, quad, rel});
  };
  for (std::size_t i = 0; i < c.verify_weights.intervals; ++i) {
    double a = rng.uniform(sde.delta(), sde.t_rev());
    double b = rng.uniform(sde.delta(), sde.t_rev());
    if (a < b) std::swap(a, b);
    for (int n : {0, 1}) {
      emit(n == 0 ? "omega0" : "omega1", a, b,
           omega_weight(sde, n, a, b, WeightMethod::kClosedForm),
           omega_weight(sde, n, a, b, WeightMethod::kQuadrature));
      if (noise) {
        emit(n == 0 ? "noise_omega0" : "noise_omega1", a, b,
             noise_omega_weight(sde, n, a, b, WeightMethod::kClosedForm),
             noise_omega_weight(sde, n, a, b, WeightMethod::kQuadrature));
      }
    }
    emit("ito", a, b, ito_increment(sde, a, b, WeightMethod::kClosedForm),
         ito_increment(sde, a, b, WeightMethod::kQuadrature));
  }
  r.passed = worst <= 1e-8;
  if (!r.passed) {
    std::ostringstream os;
    os << "largest relative discrepancy " << worst << " exceeds 1e-8";
    r.warnings.push_back(os.str());
  }
  r.timing.add_row({r.study, std::string("weights"), 0.0, as_int(c.verify_weights.intervals),
                    std::int64_t{0}, seconds_since(start)});
  return r;
}

std::vector<std::filesystem::path> write_study(const StudyResult& result,
                                               const ExperimentConfig& config,
                                               const std::filesystem::path& out_dir) {
  auto name = [&](const char* role, std::string fallback) {
    auto it = config.outputs.find(role);
    return out_dir / (it != config.outputs.end() ? it->second : fallback);
  };
  const auto csv = name("csv", result.study + ".csv");
  const auto timing = name("timing", "timing.csv");
  const auto manifest = name("manifest", "manifest.json");
  write_csv(result.table, csv);
  write_csv(result.timing, timing);

  nlohmann::ordered_json m;
  m["study"] = result.study;
  m["library_version"] = std::string(kVersion);
  m["seed"] = config.seed;
  m["config"] = nlohmann::json::parse(config.source);
  m["outputs"] = {csv.filename().string(), timing.filename().string()};
  m["rows"] = result.table.size();
  m["passed"] = result.passed;
  m["warnings"] = result.warnings;
  if (!result.slopes.empty()) {
    nlohmann::ordered_json slopes;
    for (const auto& [label, slope] : result.slopes) slopes[label] = format_real(slope);
    m["slopes"] = slopes;
  }
  write_text(manifest, m.dump(2) + "\n");
  return {csv, timing, manifest};
}

}  // namespace isde::harness
