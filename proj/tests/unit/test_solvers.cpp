#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "isde/adaptive.hpp"
#include "isde/errors.hpp"
#include "isde/prior.hpp"
#include "isde/score.hpp"
#include "isde/solvers.hpp"
#include "oracles.hpp"

using namespace isde;

namespace {

// Canonical fixture: fOUVE (1e-3, 0.1, 2), prior N(0.5, 0.2^2), y = 1, x_T = 1.07.
struct Fixture {
  InterpolatingSde sde{SdeParams{}};
  ToyPrior prior = ToyPrior::gaussian(State::Constant(1, 0.5), 0.04);
  State y = State::Constant(1, 1.0);
  State x_T = State::Constant(1, 1.07);
  AnalyticScore score{prior, sde};

  double reference() const {
    const auto a = gaussian_marginal(prior, sde, y, sde.t_rev());
    const auto b = gaussian_marginal(prior, sde, y, sde.delta());
    return b.mean[0] + (x_T[0] - a.mean[0]) * std::sqrt(b.variance / a.variance);
  }
};

// Endpoints of the same fixture from an independent numpy implementation.
constexpr double kReference = 0.770413534289899;
struct Frozen {
  std::size_t steps;
  double isde2, isde1, eum, rk2, quarter;
};
constexpr Frozen kFrozen[] = {
    {5, 0.729271681441834, 0.87100027500861, 0.67371521563088, 0.81518518495701,
     0.835458615941103},
    {10, 0.762557831079677, 0.817406319453232, 0.722049208729759, 0.780912835056958,
     0.803235295673291},
    {20, 0.768655675714495, 0.79236780683944, 0.745379426339556, 0.772909322298153,
     0.786300346369077},
    {40, 0.769996726190405, 0.780925287130599, 0.757597349454334, 0.771021465173933,
     0.778157113478968},
    {80, 0.770312009138291, 0.775545263144836, 0.763919134943509, 0.770563559636868,
     0.774227906329823},
};

InterpolatingSde sde_of(SdeKind kind) {
  SdeParams p;
  p.kind = kind;
  return make_sde(p);
}

double run(const Fixture& f, const SolverSpec& spec, std::size_t steps, std::uint64_t seed = 1) {
  Rng rng(seed);
  return solve(f.sde, f.score, f.y, f.x_T, TimeGrid::uniform(f.sde, steps), spec, rng)
      .final_state[0];
}

}  // namespace

TEST(SolverSpec, LabelsAndCosts) {
  EXPECT_EQ(SolverSpec::isde(2, 0.1).label(), "iSDE-2S-k0.1");
  EXPECT_EQ(SolverSpec::euler_maruyama().label(), "EuM-k1");
  EXPECT_EQ(SolverSpec::rk45().label(), "RK45");
  EXPECT_EQ(SolverSpec::rk2_midpoint().label(), "RK2");
  EXPECT_EQ(SolverSpec::isde(1).nfe_per_step(), 1u);
  EXPECT_EQ(SolverSpec::isde(2).nfe_per_step(), 2u);
  EXPECT_EQ(SolverSpec::predictor_corrector().nfe_per_step(), 2u);
  EXPECT_EQ(SolverSpec::euler_maruyama().nfe_per_step(), 1u);
  EXPECT_EQ(SolverSpec::rk45().nfe_per_step(), 0u);
  EXPECT_EQ(solver_kind_from_string("PC"), SolverKind::kPredictorCorrector);
  EXPECT_THROW(solver_kind_from_string("heun"), ParameterError);
}

TEST(SolverSpec, Validation) {
  EXPECT_THROW(SolverSpec::isde(3).validate(), ParameterError);
  EXPECT_THROW(SolverSpec::isde(2, 1.5).validate(), ParameterError);
  EXPECT_THROW(SolverSpec::isde(2, -0.1).validate(), ParameterError);
  EXPECT_THROW(SolverSpec::rk45(0.0, 1e-5).validate(), ParameterError);
  EXPECT_THROW(SolverSpec::predictor_corrector(-1).validate(), ParameterError);
}

TEST(TimeGrid, UniformAndCustom) {
  const auto s = sde_of(SdeKind::kBBED);
  const TimeGrid g = TimeGrid::uniform(s, 4);
  ASSERT_EQ(g.nodes().size(), 5u);
  EXPECT_DOUBLE_EQ(g.start(), 0.999);
  EXPECT_DOUBLE_EQ(g.stop(), 0.01);
  EXPECT_EQ(g.steps(), 4u);
  EXPECT_THROW(TimeGrid::custom({0.5, 0.6}), ParameterError);
  EXPECT_THROW(TimeGrid::custom({0.5, 0.0}), ParameterError);
  EXPECT_THROW(TimeGrid::custom({0.5}), ParameterError);
  EXPECT_THROW(TimeGrid::uniform(0.5, 0.1, 0), ParameterError);
  EXPECT_THROW(TimeGrid::custom({1.0, 0.5}).check_against(s), ParameterError);
  EXPECT_EQ(TimeGrid::custom({0.9, 0.5, 0.1}).spacing(), TimeGrid::Spacing::kCustom);
}

TEST(ReverseInit, FouveAddsSigmaMaxNoise) {
  const auto s = sde_of(SdeKind::kFOUVE);
  const State y = State::Constant(2, 0.3);
  Rng a(9), b(9);
  const State x = reverse_init(s, y, a);
  const State z = b.gaussian_vector(2);
  EXPECT_LE((x - (y + 0.1 * z)).norm(), 1e-15);

  Rng rng(10);
  const int n = 100000;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) sq += std::pow(reverse_init(s, State::Zero(1), rng)[0], 2);
  EXPECT_NEAR(std::sqrt(sq / n), 0.1, 0.001);
}

TEST(LinearStep, Examples) {
  const auto f = sde_of(SdeKind::kFOUVE);
  const State x = State::Constant(1, 1.0), y = State::Zero(1);
  EXPECT_EQ(linear_step(f, x, y, 0.5, 0.5), x);
  // Integrating dx = -2x dt backwards over half a unit of time grows x by e.
  const double got = linear_step(f, x, y, 1.0, 0.5)[0];
  const double ode = oracle::rk4([](double, double v) { return 2.0 * (0.0 - v); }, 1.0, 1.0, 0.5,
                                 2000);
  EXPECT_NEAR(got, std::exp(1.0), 1e-14);
  EXPECT_NEAR(got, ode, 1e-12);
  EXPECT_THROW(linear_step(f, x, y, 0.5, 0.6), ParameterError);
}

TEST(LinearStep, ReducesToAlphaRatioWhenYIsZero) {
  const oracle::Fouve o;
  const auto f = sde_of(SdeKind::kFOUVE);
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    double a = rng.uniform(0.01, 1.0), b = rng.uniform(0.01, 1.0);
    if (a < b) std::swap(a, b);
    const State x = rng.gaussian_vector(3);
    const State got = linear_step(f, x, State::Zero(3), a, b);
    EXPECT_LE((got - (o.alpha(b) / o.alpha(a)) * x).lpNorm<Eigen::Infinity>(),
              1e-14 * std::max(1.0, x.lpNorm<Eigen::Infinity>() * o.alpha(b) / o.alpha(a)));
  }
}

TEST(Isde, ZeroScoreIsExactTransport) {
  for (SdeKind kind : {SdeKind::kFOUVE, SdeKind::kBBED, SdeKind::kBrownianBridge}) {
    const auto s = sde_of(kind);
    const ZeroScore zero;
    const State y = State::Constant(2, -0.3), x0 = State::Constant(2, 0.8);
    const TimeGrid grid = TimeGrid::uniform(s, 7);
    State expect = x0;
    for (std::size_t i = 0; i + 1 < grid.nodes().size(); ++i) {
      expect = linear_step(s, expect, y, grid.nodes()[i], grid.nodes()[i + 1]);
    }
    for (int p : {1, 2}) {
      Rng rng(1);
      const auto out = isde_solve(s, zero, y, x0, grid, SolverSpec::isde(p), rng);
      EXPECT_LE((out.final_state - expect).norm(), 1e-13) << to_string(kind);
    }
  }
}

TEST(Isde, MatchesFrozenEndpoints) {
  const Fixture f;
  EXPECT_NEAR(f.reference(), kReference, 1e-13);
  SolverSpec quarter = SolverSpec::isde(2);
  quarter.derivative = DerivativeRule::kQuarterDifference;
  for (const Frozen& z : kFrozen) {
    EXPECT_NEAR(run(f, SolverSpec::isde(2), z.steps), z.isde2, 1e-12) << z.steps;
    EXPECT_NEAR(run(f, SolverSpec::isde(1), z.steps), z.isde1, 1e-12) << z.steps;
    EXPECT_NEAR(run(f, quarter, z.steps), z.quarter, 1e-12) << z.steps;
    EXPECT_NEAR(run(f, SolverSpec::euler_maruyama(0.0), z.steps), z.eum, 1e-12) << z.steps;
    EXPECT_NEAR(run(f, SolverSpec::rk2_midpoint(), z.steps), z.rk2, 1e-12) << z.steps;
  }
}

TEST(Isde, ClosedFormAndQuadratureWeightsAgree) {
  const Fixture f;
  SolverSpec q = SolverSpec::isde(2);
  q.weights = WeightMethod::kQuadrature;
  EXPECT_NEAR(run(f, q, 10), run(f, SolverSpec::isde(2), 10), 1e-10);
}

TEST(Isde, SecondOrderOnQuadratureOnlySchedules) {
  // No closed-form weights for these; the order must survive quadrature. Near
  // T = 0.999 the bridge schedules have gamma ~ 1000, and the score-form
  // expansion is preasymptotic until h resolves that layer (M of a few hundred).
  for (SdeKind kind : {SdeKind::kBBED, SdeKind::kOT, SdeKind::kBrownianBridge}) {
    const auto s = sde_of(kind);
    const ToyPrior prior = ToyPrior::gaussian(State::Constant(1, 0.5), 0.04);
    const AnalyticScore score(prior, s);
    const State y = State::Constant(1, 1.0);
    const auto top = gaussian_marginal(prior, s, y, s.t_rev());
    const State x_T = top.mean + State::Constant(1, std::sqrt(top.variance));
    const auto bottom = gaussian_marginal(prior, s, y, s.delta());
    const double ref = bottom.mean[0] + std::sqrt(bottom.variance);
    std::vector<double> hs, errs;
    for (std::size_t m : {320, 640, 1280}) {
      Rng rng(1);
      const auto out =
          isde_solve(s, score, y, x_T, TimeGrid::uniform(s, m), SolverSpec::isde(2), rng);
      hs.push_back(1.0 / m);
      errs.push_back(std::abs(out.final_state[0] - ref));
    }
    const double slope = std::log(errs.front() / errs.back()) / std::log(hs.front() / hs.back());
    EXPECT_GT(slope, 1.7) << to_string(kind);
  }
}

TEST(Isde, NfeMatchesCounterForEveryKind) {
  const Fixture f;
  const std::vector<SolverSpec> specs{SolverSpec::isde(1, 0.3), SolverSpec::isde(2, 0.0),
                                      SolverSpec::euler_maruyama(1.0),
                                      SolverSpec::predictor_corrector(0.5),
                                      SolverSpec::rk2_midpoint(), SolverSpec::rk45()};
  for (const auto& spec : specs) {
    const AnalyticScore score(f.prior, f.sde);
    Rng rng(3);
    const auto before = score.evaluations();
    const auto out = solve(f.sde, score, f.y, f.x_T, TimeGrid::uniform(f.sde, 8), spec, rng);
    EXPECT_EQ(out.nfe, score.evaluations() - before) << spec.label();
    if (spec.kind != SolverKind::kRk45Adaptive) {
      EXPECT_EQ(out.nfe, 8 * spec.nfe_per_step()) << spec.label();
    }
  }
}

TEST(Isde, NoiseModelPathCountsAdapterCalls) {
  const Fixture f;
  const EpsAdapter eps(f.score, f.sde);
  const TimeGrid grid = TimeGrid::uniform(f.sde, 6);
  const IsdePlan plan = IsdePlan::build(f.sde, grid, 2, Prediction::kNoise);
  Rng rng(1);
  const auto out = isde_solve(plan, eps, f.y, f.x_T, SolverSpec::isde(2), rng);
  EXPECT_EQ(out.nfe, 12u);
  EXPECT_EQ(eps.evaluations(), 12u);
  EXPECT_NEAR(out.final_state[0], kReference, 0.02);
  EXPECT_THROW(isde_solve(plan, f.score, f.y, f.x_T, SolverSpec::isde(2), rng), ParameterError);
}

TEST(Isde, DeterministicAndNoiseAligned) {
  const Fixture f;
  const TimeGrid grid = TimeGrid::uniform(f.sde, 12);
  auto go = [&](double kappa, std::uint64_t seed, double* next_draw) {
    Rng rng(seed);
    SolverSpec spec = SolverSpec::isde(2, kappa);
    spec.record_trajectory = true;
    auto out = isde_solve(f.sde, f.score, f.y, f.x_T, grid, spec, rng);
    *next_draw = rng.gaussian();
    return out;
  };
  double d1, d2, d3;
  const auto a = go(0.2, 5, &d1);
  const auto b = go(0.2, 5, &d2);
  const auto c = go(0.0, 5, &d3);
  EXPECT_EQ(a.final_state, b.final_state);
  EXPECT_EQ(a.seed, 5u);
  // One draw per step whatever kappa is, so the generator ends in the same state.
  EXPECT_EQ(d1, d3);
  ASSERT_EQ(a.trajectory.size(), 13u);
  EXPECT_DOUBLE_EQ(a.trajectory.front().t, 1.0);
  EXPECT_DOUBLE_EQ(a.trajectory.back().t, 0.01);
  EXPECT_EQ(a.trajectory.back().x, a.final_state);
  EXPECT_NE(a.final_state, c.final_state);
}

TEST(Isde, DivergenceReportsStep) {
  const auto s = sde_of(SdeKind::kFOUVE);
  const FunctionScore bad([](const State& x, const State&, double t) {
    return t < 0.6 ? State::Constant(x.size(), std::nan("")) : State::Zero(x.size());
  });
  Rng rng(1);
  try {
    isde_solve(s, bad, State::Zero(1), State::Zero(1), TimeGrid::uniform(1.0, 0.1, 9),
               SolverSpec::isde(1), rng);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 6u);
  }
}

TEST(Isde, WideStates) {
  const auto s = sde_of(SdeKind::kOUVE);
  Rng rng(2);
  const State m0 = rng.gaussian_vector(64), y = rng.gaussian_vector(64);
  const ToyPrior prior = ToyPrior::gaussian(m0, 0.05);
  const AnalyticScore score(prior, s);
  const State x_T = sample_marginal(prior, s, y, 1.0, rng);
  const auto out = isde_solve(s, score, y, x_T, TimeGrid::uniform(s, 40), SolverSpec::isde(2), rng);
  // Componentwise the same as 64 scalar solves.
  for (Eigen::Index i : {0, 17, 63}) {
    const ToyPrior p1 = ToyPrior::gaussian(State::Constant(1, m0[i]), 0.05);
    const AnalyticScore s1(p1, s);
    Rng r1(0);
    const auto o1 = isde_solve(s, s1, State::Constant(1, y[i]), State::Constant(1, x_T[i]),
                               TimeGrid::uniform(s, 40), SolverSpec::isde(2), r1);
    EXPECT_NEAR(out.final_state[i], o1.final_state[0], 1e-12);
  }
}

TEST(EulerMaruyama, ZeroScoreIsForwardEulerOfDrift) {
  const auto s = sde_of(SdeKind::kFOUVE);
  const ZeroScore zero;
  const TimeGrid grid = TimeGrid::uniform(s, 25);
  Rng rng(1);
  const auto out = euler_maruyama(s, zero, State::Ones(1), State::Zero(1), grid, 0.0, rng);
  double x = 0.0;
  for (std::size_t i = 0; i + 1 < grid.nodes().size(); ++i) {
    x += 2.0 * (1.0 - x) * (grid.nodes()[i + 1] - grid.nodes()[i]);
  }
  EXPECT_NEAR(out.final_state[0], x, 1e-14);
}

TEST(EulerMaruyama, FineGridMatchesReference) {
  const Fixture f;
  EXPECT_NEAR(run(f, SolverSpec::euler_maruyama(0.0), 2000), kReference, 1e-3);
}

TEST(EulerMaruyama, DeltaPriorFinalSpread) {
  const auto s = sde_of(SdeKind::kFOUVE);
  const ToyPrior prior = ToyPrior::delta(State::Constant(1, 0.5));
  const AnalyticScore score(prior, s);
  const State y = State::Ones(1);
  const TimeGrid grid = TimeGrid::uniform(s, 1000);
  const int n = 10000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    Rng rng(substream_seed(4, i));
    const State x0 = sample_marginal(prior, s, y, 1.0, rng);
    const double x = euler_maruyama(s, score, y, x0, grid, 1.0, rng).final_state[0];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
  const double target = 1e-3 * std::pow(100.0, 0.01);
  EXPECT_NEAR(target, 1.047e-3, 1e-6);
  EXPECT_NEAR(sd / target, 1.0, 0.05);
}

TEST(PredictorCorrector, ZeroStepMatchesEuler) {
  const Fixture f;
  const TimeGrid grid = TimeGrid::uniform(f.sde, 30);
  Rng a(8), b(8);
  const auto pc = pc_sampler(f.sde, f.score, f.y, f.x_T, grid, 0.0, a);
  const auto em = euler_maruyama(f.sde, f.score, f.y, f.x_T, grid, 1.0, b);
  EXPECT_EQ(pc.final_state, em.final_state);
  EXPECT_EQ(pc.nfe, 60u);
  EXPECT_EQ(em.nfe, 30u);
}

// With the Delta prior the score is -(x - mu) / sigma^2, so the corrector is the
// linear map x <- mu + (1 - 2 r^2)(x - mu) + 2 r sigma z. Its fixed-point
// variance is 4 r^2 sigma^2 / (1 - (1 - 2 r^2)^2): 1.1547 sigma for r = 0.5,
// not sigma. This is the usual bias of an unadjusted Langevin step.
double pc_delta_spread(double snr, std::size_t steps, int n) {
  const auto s = sde_of(SdeKind::kFOUVE);
  const ToyPrior prior = ToyPrior::delta(State::Constant(1, 0.5));
  const AnalyticScore score(prior, s);
  const State y = State::Ones(1);
  const TimeGrid grid = TimeGrid::uniform(s, steps);
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    Rng rng(substream_seed(6, i));
    const State x0 = sample_marginal(prior, s, y, 1.0, rng);
    const auto out = pc_sampler(s, score, y, x0, grid, snr, rng);
    EXPECT_EQ(out.nfe, 2 * steps);
    sum += out.final_state[0];
    sq += out.final_state[0] * out.final_state[0];
  }
  const double mean = sum / n;
  return std::sqrt((sq - n * mean * mean) / (n - 1)) / s.sigma(s.delta());
}

double langevin_inflation(double r) {
  const double c = 1.0 - 2.0 * r * r;
  return 2.0 * r / std::sqrt(1.0 - c * c);
}

TEST(PredictorCorrector, DeltaPriorFinalSpread) {
  EXPECT_NEAR(langevin_inflation(0.5), 1.0 / std::sqrt(0.75), 1e-15);
  // 5000 draws: the sd ratio has a standard error near 1%.
  EXPECT_NEAR(pc_delta_spread(0.5, 500, 5000), langevin_inflation(0.5), 0.03);
  EXPECT_NEAR(pc_delta_spread(0.1, 500, 5000), langevin_inflation(0.1), 0.03);
}

TEST(Rk2, ConstantFieldIsExactInOneStep) {
  const auto s = sde_of(SdeKind::kFOUVE);
  const double c = 0.7;
  // Score chosen so that gamma (y - x) - g^2 s / 2 == c everywhere.
  const FunctionScore score([&s, c](const State& x, const State& y, double t) {
    return State(2.0 * (s.gamma(t) * (y - x).array() - c).matrix() / s.g_squared(t));
  });
  const auto out = rk2_midpoint(s, score, State::Zero(1), State::Constant(1, 0.2),
                                TimeGrid::custom({0.9, 0.4}));
  EXPECT_NEAR(out.final_state[0], 0.2 + c * (0.4 - 0.9), 1e-14);
  EXPECT_EQ(out.nfe, 2u);
}

TEST(Rk2, ZeroScoreWorseThanExactTransport) {
  const auto s = sde_of(SdeKind::kFOUVE);
  const ZeroScore zero;
  const State y = State::Ones(1), x = State::Zero(1);
  const double exact = linear_step(s, x, y, 1.0, 0.01)[0];
  double prev = 0.0;
  for (std::size_t m : {10, 20, 40}) {
    const double err =
        std::abs(rk2_midpoint(s, zero, y, x, TimeGrid::uniform(s, m)).final_state[0] - exact);
    EXPECT_GT(err, 1e-8);
    if (prev > 0) EXPECT_NEAR(prev / err, 4.0, 0.3);
    prev = err;
  }
}

TEST(Rk45, ExponentialDecay) {
  OdeField f = [](double, const State& x, State& dx) { dx = -x; };
  AdaptiveOptions o;
  o.rtol = 1e-6;
  o.atol = 1e-9;
  const auto r = integrate_dopri5(f, State::Ones(1), 0.0, 5.0, o);
  EXPECT_LE(std::abs(r.state[0] - std::exp(-5.0)), 10 * o.rtol);
  const auto back = integrate_dopri5(f, State::Ones(1), 0.0, -2.0, o);
  EXPECT_NEAR(back.state[0], std::exp(2.0), 10 * o.rtol * std::exp(2.0));
}

TEST(Rk45, GaussianFixtureAndTolerances) {
  const Fixture f;
  const auto loose = rk45_adaptive(f.sde, f.score, f.y, f.x_T, 1.0, 0.01, 1e-5, 1e-5);
  const double e_loose = std::abs(loose.final_state[0] - kReference);
  EXPECT_LE(e_loose, 1e-4);
  EXPECT_GT(loose.nfe, 40u);
  const auto tight = rk45_adaptive(f.sde, f.score, f.y, f.x_T, 1.0, 0.01, 1e-7, 1e-7);
  EXPECT_LE(std::abs(tight.final_state[0] - kReference), e_loose / 10);
  const auto very = rk45_adaptive(f.sde, f.score, f.y, f.x_T, 1.0, 0.01, 1e-10, 1e-10);
  EXPECT_NEAR(very.final_state[0], kReference, 1e-8);
}

TEST(Rk45, StepBudgetIsStiffnessError) {
  OdeField f = [](double, const State& x, State& dx) { dx = x.array().square().matrix(); };
  AdaptiveOptions o;
  EXPECT_THROW(integrate_dopri5(f, State::Ones(1), 0.0, 2.0, o), Error);
  o.max_steps = 3;
  OdeField g = [](double, const State& x, State& dx) { dx = -50.0 * x; };
  EXPECT_THROW(integrate_dopri5(g, State::Ones(1), 0.0, 10.0, o), StiffnessError);
}
