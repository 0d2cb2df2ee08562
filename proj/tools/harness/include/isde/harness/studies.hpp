#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "isde/harness/config.hpp"
#include "isde/harness/table.hpp"
#include "isde/prior.hpp"
#include "isde/sde.hpp"

namespace isde::harness {

/// Exact probability-flow solution for a Gaussian or Delta prior: the flow
/// keeps (x - m(t)) / sqrt(v(t)) fixed, so
///
///   x(t_end) = m(t_end) + (x_T - m(t_start)) sqrt(v(t_end) / v(t_start)).
///
/// Throws SingularityError when v(t_start) = 0, ParameterError for mixtures.
State reference_solution(const InterpolatingSde& sde, const ToyPrior& prior, const State& y,
                         const State& x_T, double t_start, double t_end);
/// From sde.t_rev() down to sde.delta().
State reference_solution(const InterpolatingSde& sde, const ToyPrior& prior, const State& y,
                         const State& x_T);

struct StudyResult {
  std::string study;
  Table table;   // the study CSV; a pure function of (config, seed)
  Table timing;  // wall-clock runtimes, kept out of `table`
  std::map<std::string, double> slopes;  // convergence only, by solver label
  std::vector<std::string> warnings;
  bool passed = true;  // marginal_check verdict; true elsewhere
};

/// Endpoint statistics of a sample of final states against N(mean, variance I).
struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;      // pooled over components
  double variance = 0.0;  // unbiased, pooled over components
  double mean_deviation = 0.0;        // max_i |mean_i - target_i|
  double mean_standard_error = 0.0;   // sqrt(target variance / n)
  double variance_relative_deviation = 0.0;
  double ks_statistic = -1.0;  // scalar states only; -1 otherwise
};

SampleStats sample_stats(const std::vector<State>& samples, const State& target_mean,
                         double target_variance);

/// Kolmogorov-Smirnov distance between a scalar sample and N(mean, variance).
double ks_statistic(std::vector<double> sample, double mean, double variance);

/// Asymptotic 1% critical value 1.628 / sqrt(n).
double ks_critical_value_1pct(std::size_t n);

/// Least-squares slope of log(error) against log(h) over the finite, positive rows.
double loglog_slope(const std::vector<double>& h, const std::vector<double>& error);

StudyResult simulate_forward(const ExperimentConfig& config);
/// One run per solver (n_trajectories of them for stochastic solvers).
StudyResult solve_study(const ExperimentConfig& config);
StudyResult convergence_study(const ExperimentConfig& config);
StudyResult nfe_sweep(const ExperimentConfig& config);
StudyResult kappa_sweep(const ExperimentConfig& config);
StudyResult marginal_check(const ExperimentConfig& config);
StudyResult verify_weights(const ExperimentConfig& config);

/// Writes the study CSV, timing.csv and manifest.json into `out_dir`.
/// Returns the paths written.
std::vector<std::filesystem::path> write_study(const StudyResult& result,
                                               const ExperimentConfig& config,
                                               const std::filesystem::path& out_dir);

}  // namespace isde::harness
