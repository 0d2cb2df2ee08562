#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isde/prior.hpp"
#include "isde/sde.hpp"
#include "isde/solvers.hpp"
#include "isde/state.hpp"

namespace isde::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Where stochastic runs start at t = T.
enum class InitMode {
  kFixed,        // the configured x_T
  kMarginal,     // an exact draw from the forward marginal at T
  kObservation,  // reverse_init: y + sigma(T) z
};

std::string_view to_string(InitMode mode);

struct SolverConfig {
  SolverSpec spec;
  Prediction prediction = Prediction::kScore;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> nfe;

  std::string label() const;
  /// Steps on the grid: `steps` if given, else `nfe / nfe_per_step`. Throws
  /// ConfigError when neither is set or the budget does not divide evenly.
  std::size_t resolve_steps() const;
};

/// Steps for a per-solver NFE budget. Throws ConfigError naming the solver
/// when the budget is not a multiple of the per-step cost.
std::size_t steps_for_budget(const SolverConfig& solver, std::size_t budget);

struct ConvergenceOptions {
  std::vector<std::size_t> steps{5, 10, 20, 40, 80};
};

struct NfeSweepOptions {
  std::vector<std::size_t> budgets{4, 10, 20, 40};
};

struct KappaSweepOptions {
  std::vector<double> kappas{0.0, 0.05, 0.1, 0.125, 0.15};
  std::size_t nfe = 10;
  int order = 2;
};

struct MarginalCheckOptions {
  double mean_standard_errors = 3.0;
  double variance_relative = 0.05;
};

struct ForwardOptions {
  std::vector<double> times;  // empty: just t_rev
};

struct VerifyWeightsOptions {
  std::size_t intervals = 100;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  SdeParams sde;
  ToyPrior prior = ToyPrior::gaussian(State::Constant(1, 0.5), 0.04);
  State y = State::Constant(1, 1.0);
  std::optional<State> x_T;
  InitMode init = InitMode::kMarginal;
  std::vector<SolverConfig> solvers;
  std::size_t n_trajectories = 1000;

  ConvergenceOptions convergence;
  NfeSweepOptions nfe_sweep;
  KappaSweepOptions kappa_sweep;
  MarginalCheckOptions marginal_check;
  ForwardOptions forward;
  VerifyWeightsOptions verify_weights;

  /// File names inside the output directory, keyed by role ("csv",
  /// "manifest", "timing"). Missing roles fall back to per-study defaults.
  std::map<std::string, std::string> outputs;

  /// Canonical JSON of the parsed file, echoed into the run manifest.
  std::string source;

  /// Scalar fOUVE (sigma_min 1e-3, sigma_max 0.1, gamma0 2), Gaussian prior
  /// N(0.5, 0.2^2), y = 1, x_T = 1.07, with the four kappa = 0 fixed-step solvers.
  static ExperimentConfig canonical(std::uint64_t seed = 20240501);

  void validate() const;
};

/// JSON with comments allowed. `seed_override` replaces the file's seed (and is
/// what makes the seed optional in the file). Throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text,
                              std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override = std::nullopt);

SolverConfig parse_solver(const std::string& json_text);

}  // namespace isde::harness
