#include "isde/prior.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "isde/errors.hpp"

namespace isde {

std::string_view to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::kDelta: return "delta";
    case PriorKind::kGaussian: return "gaussian";
    case PriorKind::kMixture: return "mixture";
  }
  return "unknown";
}

ToyPrior::ToyPrior(PriorKind kind, std::vector<GaussianComponent> components)
    : kind_(kind), components_(std::move(components)) {
  if (components_.empty()) throw ParameterError("prior needs at least one component");
  const Eigen::Index dim = components_.front().mean.size();
  if (dim < 1) throw ShapeError("prior dimension must be at least 1");
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.mean.size() != dim) throw ShapeError("prior components differ in dimension");
    if (!c.mean.allFinite()) throw ParameterError("prior mean must be finite");
    if (!(c.weight > 0.0)) throw ParameterError("mixture weights must be positive");
    if (!(c.variance >= 0.0) || !std::isfinite(c.variance)) {
      throw ParameterError("prior variances must be finite and nonnegative");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "mixture weights must sum to 1 (got " << total << ")";
    throw ParameterError(os.str());
  }
}

ToyPrior ToyPrior::delta(State x0) {
  return ToyPrior(PriorKind::kDelta, {GaussianComponent{1.0, std::move(x0), 0.0}});
}

ToyPrior ToyPrior::gaussian(State mean, double variance) {
  return ToyPrior(PriorKind::kGaussian, {GaussianComponent{1.0, std::move(mean), variance}});
}

ToyPrior ToyPrior::mixture(std::vector<double> weights, std::vector<State> means,
                           std::vector<double> variances) {
  if (weights.size() != means.size() || weights.size() != variances.size()) {
    throw ParameterError("mixture weights, means and variances differ in length");
  }
  std::vector<GaussianComponent> components;
  components.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    components.push_back({weights[i], std::move(means[i]), variances[i]});
  }
  return ToyPrior(PriorKind::kMixture, std::move(components));
}

State ToyPrior::sample(Rng& rng) const {
  std::size_t index = 0;
  if (components_.size() > 1) {
    const double u = rng.uniform(0.0, 1.0);
    double acc = 0.0;
    index = components_.size() - 1;
    for (std::size_t i = 0; i < components_.size(); ++i) {
      acc += components_[i].weight;
      if (u < acc) {
        index = i;
        break;
      }
    }
  }
  const GaussianComponent& c = components_[index];
  if (c.variance == 0.0) return c.mean;
  return c.mean + std::sqrt(c.variance) * rng.gaussian_vector(c.mean.size());
}

std::vector<GaussianComponent> marginal_components(const ToyPrior& prior,
                                                   const InterpolatingSde& sde, const State& y,
                                                   double t) {
  check_same_dimension(prior.components().front().mean, y, "marginal_components");
  const double keep = sde.one_minus_k(t);
  const double var_t = sde.variance(t);
  std::vector<GaussianComponent> out;
  out.reserve(prior.components().size());
  for (const auto& c : prior.components()) {
    out.push_back({c.weight, keep * c.mean + (1.0 - keep) * y, keep * keep * c.variance + var_t});
  }
  return out;
}

GaussianComponent gaussian_marginal(const ToyPrior& prior, const InterpolatingSde& sde,
                                    const State& y, double t) {
  if (prior.kind() == PriorKind::kMixture) {
    throw ParameterError("closed-form Gaussian marginal requires a delta or Gaussian prior");
  }
  return marginal_components(prior, sde, y, t).front();
}

State sample_marginal(const ToyPrior& prior, const InterpolatingSde& sde, const State& y,
                      double t, Rng& rng) {
  const State x0 = prior.sample(rng);
  return sample_forward(sde, x0, y, t, rng);
}

}  // namespace isde
