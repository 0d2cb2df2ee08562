#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "isde/score.hpp"
#include "isde/sde.hpp"
#include "isde/state.hpp"
#include "isde/time_grid.hpp"
#include "isde/weights.hpp"

namespace isde {

enum class SolverKind { kEulerMaruyama, kPredictorCorrector, kRk2Midpoint, kRk45Adaptive, kIsde };

std::string_view to_string(SolverKind kind);
/// Accepts "eum", "pc", "rk2", "rk45", "isde" (and a few spelled-out aliases).
SolverKind solver_kind_from_string(std::string_view name);

/// How the second-order iSDE step estimates the time derivative of the model
/// output from its two evaluations (at t_from and at the half step).
enum class DerivativeRule {
  /// (m(s) - m(t_from)) / (s - t_from): a consistent first-derivative estimate.
  kForwardDifference,
  /// (m(t_from) - m(s)) / (2 (t_from - t_to)): a quarter of the above. Kept to
  /// demonstrate that it degrades the scheme to first order.
  kQuarterDifference,
};

/// What the model passed to the iSDE solver predicts. Score models are
/// Taylor-expanded directly; noise models are expanded in rho = -sigma s,
/// which changes the weights (see noise_omega_weight).
enum class Prediction { kScore, kNoise };

struct SolverSpec {
  SolverKind kind = SolverKind::kIsde;
  int order = 2;               // iSDE only: 1 or 2
  double kappa = 0.0;          // iSDE and EuM noise scale in [0, 1]
  double corrector_snr = 0.5;  // PC corrector step size r
  double rtol = 1e-5;          // RK45
  double atol = 1e-5;          // RK45
  DerivativeRule derivative = DerivativeRule::kForwardDifference;
  WeightMethod weights = WeightMethod::kAuto;
  bool record_trajectory = false;

  static SolverSpec isde(int order, double kappa = 0.0);
  static SolverSpec euler_maruyama(double kappa = 1.0);
  static SolverSpec predictor_corrector(double snr = 0.5);
  static SolverSpec rk2_midpoint();
  static SolverSpec rk45(double rtol = 1e-5, double atol = 1e-5);

  void validate() const;
  /// Score evaluations per fixed step; 0 for the adaptive solver.
  std::size_t nfe_per_step() const;
  /// Short human-readable name, e.g. "iSDE-2S-k0.1", "EuM-k1", "RK45".
  std::string label() const;
};

struct TrajectoryPoint {
  double t = 0.0;
  State x;
};

struct SolveOutput {
  State final_state;
  std::vector<TrajectoryPoint> trajectory;  // empty unless requested
  std::uint64_t nfe = 0;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::size_t rejected_steps = 0;  // RK45 only
};

/// x_T = y + sigma(T) z: the reverse start with mu_T(x0, y) approximated by y.
State reverse_init(const InterpolatingSde& sde, const State& y, Rng& rng);

/// Exact transport of the drift gamma (y - x) backwards from t_from to t_to:
/// r x + (1 - r) y with r = (1 - k(t_to)) / (1 - k(t_from)).
State linear_step(const InterpolatingSde& sde, const State& x, const State& y, double t_from,
                  double t_to);

/// Reverse drift f - ((1 + kappa^2) / 2) g^2 s evaluated into `out`. One
/// score evaluation. kappa = 0 gives the probability-flow field.
void reverse_drift(const InterpolatingSde& sde, const ScoreModel& score, const State& x,
                   const State& y, double t, double kappa, State& out);

/// Per-step coefficients of the exponential integrator on a fixed grid.
struct IsdeStep {
  double t_from = 0.0;
  double t_to = 0.0;
  double t_mid = 0.0;
  double transport = 1.0;      // (1-k(t_to)) / (1-k(t_from))
  double keep_to = 1.0;        // 1 - k(t_to)
  double w0 = 0.0;
  double w1 = 0.0;
  double transport_mid = 1.0;  // to the half step
  double keep_mid = 1.0;
  double w0_mid = 0.0;
  double ito = 0.0;            // std of the transported noise increment
};

/// Weights and transports for every step of a grid, computed once and
/// read-only afterwards; share one plan across any number of trajectories.
class IsdePlan {
 public:
  static IsdePlan build(const InterpolatingSde& sde, const TimeGrid& grid, int order,
                        Prediction prediction = Prediction::kScore,
                        WeightMethod method = WeightMethod::kAuto);

  const std::vector<IsdeStep>& steps() const noexcept { return steps_; }
  int order() const noexcept { return order_; }
  Prediction prediction() const noexcept { return prediction_; }

 private:
  std::vector<IsdeStep> steps_;
  int order_ = 1;
  Prediction prediction_ = Prediction::kScore;
};

/// iSDE-pS-kappa. p = 1:
///
///   x <- L(x) - (1 + kappa^2) (1 - k(t_to)) w_0 s(x, t_from) + kappa I z
///
/// p = 2 first moves to the half step with the p = 1, kappa = 0 update, uses
/// the second evaluation there to estimate ds/dt, and adds the w_1 term. With
/// a noise model the sign flips and the noise weights are used. One standard
/// normal vector is drawn per step after the deterministic update, for every
/// kappa. NFE = steps * p.
SolveOutput isde_solve(const IsdePlan& plan, const ScoreModel& score, const State& y,
                       const State& x_start, const SolverSpec& spec, Rng& rng);
SolveOutput isde_solve(const IsdePlan& plan, const NoiseModel& noise, const State& y,
                       const State& x_start, const SolverSpec& spec, Rng& rng);
SolveOutput isde_solve(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                       const State& x_start, const TimeGrid& grid, const SolverSpec& spec,
                       Rng& rng);
SolveOutput isde_solve(const InterpolatingSde& sde, const NoiseModel& noise, const State& y,
                       const State& x_start, const TimeGrid& grid, const SolverSpec& spec,
                       Rng& rng);
/// Starts from reverse_init(sde, y, rng).
SolveOutput isde_solve(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                       const TimeGrid& grid, const SolverSpec& spec, Rng& rng);

/// x <- x + [f - ((1+kappa^2)/2) g^2 s] (t_to - t_from) + kappa g sqrt(t_from - t_to) z.
SolveOutput euler_maruyama(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                           const State& x_start, const TimeGrid& grid, double kappa, Rng& rng,
                           bool record_trajectory = false);

/// Euler-Maruyama predictor (kappa = 1) followed by one annealed Langevin
/// corrector step x <- x + eta s + sqrt(2 eta) z with eta = 2 (r sigma(t_to))^2.
/// The corrector evaluates the score on every step; it draws its noise only
/// when eta > 0.
SolveOutput pc_sampler(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                       const State& x_start, const TimeGrid& grid, double corrector_snr,
                       Rng& rng, bool record_trajectory = false);

/// Explicit midpoint rule on the probability-flow ODE.
SolveOutput rk2_midpoint(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                         const State& x_start, const TimeGrid& grid,
                         bool record_trajectory = false);

/// Dormand-Prince 5(4) with PI step control on the probability-flow ODE.
/// Throws StiffnessError if the step size underflows.
SolveOutput rk45_adaptive(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                          const State& x_start, double t_start, double t_end, double rtol = 1e-5,
                          double atol = 1e-5, bool record_trajectory = false);

/// Dispatch on spec.kind. RK45 integrates from grid.start() to grid.stop().
SolveOutput solve(const InterpolatingSde& sde, const ScoreModel& score, const State& y,
                  const State& x_start, const TimeGrid& grid, const SolverSpec& spec, Rng& rng);

}  // namespace isde
