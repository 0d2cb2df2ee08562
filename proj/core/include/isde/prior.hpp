#pragma once

#include <string_view>
#include <vector>

#include "isde/sde.hpp"
#include "isde/state.hpp"

namespace isde {

enum class PriorKind { kDelta, kGaussian, kMixture };

std::string_view to_string(PriorKind kind);

/// One isotropic Gaussian component N(mean, variance I) with mixture weight.
struct GaussianComponent {
  double weight = 1.0;
  State mean;
  double variance = 0.0;
};

/// Toy distribution of clean data x0 with a closed-form marginal under any
/// interpolating SDE. Delta and Gaussian are single-component special cases.
class ToyPrior {
 public:
  static ToyPrior delta(State x0);
  static ToyPrior gaussian(State mean, double variance);
  static ToyPrior mixture(std::vector<double> weights, std::vector<State> means,
                          std::vector<double> variances);

  PriorKind kind() const noexcept { return kind_; }
  Eigen::Index dimension() const noexcept { return components_.front().mean.size(); }
  const std::vector<GaussianComponent>& components() const noexcept { return components_; }

  State sample(Rng& rng) const;

 private:
  ToyPrior(PriorKind kind, std::vector<GaussianComponent> components);

  PriorKind kind_;
  std::vector<GaussianComponent> components_;
};

/// Components of p_t(x | y): mean (1-k) m + k y, variance (1-k)^2 s^2 + sigma_t^2.
std::vector<GaussianComponent> marginal_components(const ToyPrior& prior,
                                                   const InterpolatingSde& sde, const State& y,
                                                   double t);

/// Mean and variance of a single-component marginal. Throws ParameterError for mixtures.
GaussianComponent gaussian_marginal(const ToyPrior& prior, const InterpolatingSde& sde,
                                    const State& y, double t);

/// Draw from the forward marginal: x0 from the prior, then the perturbation kernel.
State sample_marginal(const ToyPrior& prior, const InterpolatingSde& sde, const State& y,
                      double t, Rng& rng);

}  // namespace isde
