#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <vector>

#include "isde/prior.hpp"
#include "isde/sde.hpp"
#include "isde/state.hpp"

namespace isde {

/// A vector field (x, y, t) -> R^d that counts its own invocations. Every call
/// through operator() or evaluate_into adds exactly one to evaluations().
class CountedField {
 public:
  CountedField() = default;
  CountedField(const CountedField&) = delete;
  CountedField& operator=(const CountedField&) = delete;
  virtual ~CountedField() = default;

  State operator()(const State& x, const State& y, double t) const;
  /// Writes into `out`, resizing it if needed. No allocation when sized.
  void evaluate_into(const State& x, const State& y, double t, State& out) const;

  std::uint64_t evaluations() const noexcept {
    return evaluations_.load(std::memory_order_relaxed);
  }

 protected:
  virtual void compute(const State& x, const State& y, double t, State& out) const = 0;

 private:
  mutable std::atomic<std::uint64_t> evaluations_{0};
};

/// Approximates grad_x log p_t(x | y).
class ScoreModel : public CountedField {};

/// Epsilon parameterization: predicts the standardized noise, score = -rho / sigma_t.
class NoiseModel : public CountedField {};

/// Exact marginal score of a toy prior pushed through the perturbation kernel.
/// Mixture responsibilities are formed in log space.
class AnalyticScore final : public ScoreModel {
 public:
  AnalyticScore(ToyPrior prior, InterpolatingSde sde);

  const ToyPrior& prior() const noexcept { return prior_; }
  const InterpolatingSde& sde() const noexcept { return sde_; }

 protected:
  void compute(const State& x, const State& y, double t, State& out) const override;

 private:
  ToyPrior prior_;
  InterpolatingSde sde_;
};

class ZeroScore final : public ScoreModel {
 protected:
  void compute(const State& x, const State&, double, State& out) const override {
    out.setZero(x.size());
  }
};

/// Wraps an arbitrary callable; handy for tests and toy fields.
class FunctionScore final : public ScoreModel {
 public:
  using Fn = std::function<State(const State&, const State&, double)>;
  explicit FunctionScore(Fn fn) : fn_(std::move(fn)) {}

 protected:
  void compute(const State& x, const State& y, double t, State& out) const override;

 private:
  Fn fn_;
};

/// rho(x, y, t) = -sigma_t s(x, y, t). Holds a reference to `score`.
class EpsAdapter final : public NoiseModel {
 public:
  EpsAdapter(const ScoreModel& score, InterpolatingSde sde) : score_(score), sde_(std::move(sde)) {}

 protected:
  void compute(const State& x, const State& y, double t, State& out) const override;

 private:
  const ScoreModel& score_;
  InterpolatingSde sde_;
};

/// s(x, y, t) = -rho(x, y, t) / sigma_t. Inverse of EpsAdapter.
class ScoreFromNoise final : public ScoreModel {
 public:
  ScoreFromNoise(const NoiseModel& noise, InterpolatingSde sde)
      : noise_(noise), sde_(std::move(sde)) {}

 protected:
  void compute(const State& x, const State& y, double t, State& out) const override;

 private:
  const NoiseModel& noise_;
  InterpolatingSde sde_;
};

/// Marginal score of `prior` at (x, t) given y. Throws SingularityError when a
/// component's marginal variance is zero.
State analytic_score(const ToyPrior& prior, const InterpolatingSde& sde, const State& x,
                     const State& y, double t);

/// Log density of the marginal p_t(x | y).
double log_marginal_density(const ToyPrior& prior, const InterpolatingSde& sde, const State& x,
                            const State& y, double t);

EpsAdapter eps_adapter(const ScoreModel& score, const InterpolatingSde& sde);

/// One Monte Carlo draw of the training objectives: t ~ U[delta, T], x0 ~ prior,
/// eps ~ N(0, I), x_t = mu_t(x0, y) + sigma_t eps.
struct LossSample {
  double t = 0.0;
  double sigma = 0.0;
  State x0;
  State eps;
  State x_t;
};

std::vector<LossSample> draw_loss_samples(const ToyPrior& prior, const InterpolatingSde& sde,
                                          const State& y, std::size_t n, Rng& rng);

/// || s(x_t, y, t) + eps / sigma_t ||^2
double dsm_residual(const ScoreModel& score, const LossSample& sample, const State& y);
/// || rho(x_t, y, t) - eps ||^2
double eps_residual(const NoiseModel& noise, const LossSample& sample, const State& y);

double dsm_loss_mc(const ScoreModel& score, const ToyPrior& prior, const InterpolatingSde& sde,
                   const State& y, std::size_t n_samples, Rng& rng);
double eps_loss_mc(const NoiseModel& noise, const ToyPrior& prior, const InterpolatingSde& sde,
                   const State& y, std::size_t n_samples, Rng& rng);

}  // namespace isde
