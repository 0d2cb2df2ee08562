#include "isde/score.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "isde/errors.hpp"

namespace isde {

namespace {

void require_positive_variance(double v, double t) {
  if (!(v > 0.0)) {
    std::ostringstream os;
    os << "marginal variance vanishes at t = " << t;
    throw SingularityError(os.str());
  }
}

double nonzero_sigma(const InterpolatingSde& sde, double t) {
  const double sigma = sde.sigma(t);
  if (!(sigma > 0.0)) {
    std::ostringstream os;
    os << "sigma_t vanishes at t = " << t << "; epsilon form undefined";
    throw SingularityError(os.str());
  }
  return sigma;
}

// Mixture score: sum_j r_j * (-(x - m_j) / v_j) with r_j from log-space softmax.
void mixture_score(const std::vector<GaussianComponent>& comps, const State& x, double t,
                   State& out) {
  const double dim = static_cast<double>(x.size());
  std::vector<double> log_w(comps.size());
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < comps.size(); ++j) {
    require_positive_variance(comps[j].variance, t);
    const double v = comps[j].variance;
    log_w[j] = std::log(comps[j].weight) - 0.5 * dim * std::log(2.0 * std::numbers::pi * v) -
               0.5 * (x - comps[j].mean).squaredNorm() / v;
    max_log = std::max(max_log, log_w[j]);
  }
  double total = 0.0;
  for (double& lw : log_w) {
    lw = std::exp(lw - max_log);
    total += lw;
  }
  out.setZero(x.size());
  for (std::size_t j = 0; j < comps.size(); ++j) {
    out.noalias() -= (log_w[j] / total / comps[j].variance) * (x - comps[j].mean);
  }
}

}  // namespace

State CountedField::operator()(const State& x, const State& y, double t) const {
  State out(x.size());
  evaluate_into(x, y, t, out);
  return out;
}

void CountedField::evaluate_into(const State& x, const State& y, double t, State& out) const {
  evaluations_.fetch_add(1, std::memory_order_relaxed);
  if (out.size() != x.size()) out.resize(x.size());
  compute(x, y, t, out);
  if (out.size() != x.size()) throw ShapeError("model output dimension differs from input");
}

AnalyticScore::AnalyticScore(ToyPrior prior, InterpolatingSde sde)
    : prior_(std::move(prior)), sde_(std::move(sde)) {}

void AnalyticScore::compute(const State& x, const State& y, double t, State& out) const {
  check_same_dimension(x, y, "analytic score");
  check_same_dimension(x, prior_.components().front().mean, "analytic score");
  if (prior_.components().size() == 1) {
    // Allocation-free path for the single-component priors used by the solvers.
    const GaussianComponent& c = prior_.components().front();
    const double keep = sde_.one_minus_k(t);
    const double v = keep * keep * c.variance + sde_.variance(t);
    require_positive_variance(v, t);
    out = -(x - keep * c.mean - (1.0 - keep) * y) / v;
    return;
  }
  mixture_score(marginal_components(prior_, sde_, y, t), x, t, out);
}

void FunctionScore::compute(const State& x, const State& y, double t, State& out) const {
  out = fn_(x, y, t);
}

void EpsAdapter::compute(const State& x, const State& y, double t, State& out) const {
  const double sigma = nonzero_sigma(sde_, t);
  score_.evaluate_into(x, y, t, out);
  out *= -sigma;
}

void ScoreFromNoise::compute(const State& x, const State& y, double t, State& out) const {
  const double sigma = nonzero_sigma(sde_, t);
  noise_.evaluate_into(x, y, t, out);
  out /= -sigma;
}

State analytic_score(const ToyPrior& prior, const InterpolatingSde& sde, const State& x,
                     const State& y, double t) {
  check_same_dimension(x, y, "analytic_score");
  const auto comps = marginal_components(prior, sde, y, t);
  State out(x.size());
  if (comps.size() == 1) {
    require_positive_variance(comps.front().variance, t);
    out = -(x - comps.front().mean) / comps.front().variance;
  } else {
    mixture_score(comps, x, t, out);
  }
  return out;
}

double log_marginal_density(const ToyPrior& prior, const InterpolatingSde& sde, const State& x,
                            const State& y, double t) {
  check_same_dimension(x, y, "log_marginal_density");
  const auto comps = marginal_components(prior, sde, y, t);
  const double dim = static_cast<double>(x.size());
  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(comps.size());
  for (const auto& c : comps) {
    require_positive_variance(c.variance, t);
    const double lt = std::log(c.weight) -
                      0.5 * dim * std::log(2.0 * std::numbers::pi * c.variance) -
                      0.5 * (x - c.mean).squaredNorm() / c.variance;
    terms.push_back(lt);
    max_log = std::max(max_log, lt);
  }
  double acc = 0.0;
  for (double lt : terms) acc += std::exp(lt - max_log);
  return max_log + std::log(acc);
}

EpsAdapter eps_adapter(const ScoreModel& score, const InterpolatingSde& sde) {
  return EpsAdapter(score, sde);
}

std::vector<LossSample> draw_loss_samples(const ToyPrior& prior, const InterpolatingSde& sde,
                                          const State& y, std::size_t n, Rng& rng) {
  if (n < 1) throw ParameterError("loss estimate needs at least one sample");
  check_same_dimension(prior.components().front().mean, y, "draw_loss_samples");
  std::vector<LossSample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LossSample s;
    s.t = rng.uniform(sde.delta(), sde.t_rev());
    s.sigma = sde.sigma(s.t);
    s.x0 = prior.sample(rng);
    s.eps = rng.gaussian_vector(y.size());
    s.x_t = mean_evolution(sde, s.x0, y, s.t) + s.sigma * s.eps;
    samples.push_back(std::move(s));
  }
  return samples;
}

double dsm_residual(const ScoreModel& score, const LossSample& sample, const State& y) {
  const State s = score(sample.x_t, y, sample.t);
  return (s + sample.eps / sample.sigma).squaredNorm();
}

double eps_residual(const NoiseModel& noise, const LossSample& sample, const State& y) {
  const State rho = noise(sample.x_t, y, sample.t);
  return (rho - sample.eps).squaredNorm();
}

double dsm_loss_mc(const ScoreModel& score, const ToyPrior& prior, const InterpolatingSde& sde,
                   const State& y, std::size_t n_samples, Rng& rng) {
  double acc = 0.0;
  for (const LossSample& s : draw_loss_samples(prior, sde, y, n_samples, rng)) {
    acc += dsm_residual(score, s, y);
  }
  return acc / static_cast<double>(n_samples);
}

double eps_loss_mc(const NoiseModel& noise, const ToyPrior& prior, const InterpolatingSde& sde,
                   const State& y, std::size_t n_samples, Rng& rng) {
  double acc = 0.0;
  for (const LossSample& s : draw_loss_samples(prior, sde, y, n_samples, rng)) {
    acc += eps_residual(noise, s, y);
  }
  return acc / static_cast<double>(n_samples);
}

}  // namespace isde
