#include <benchmark/benchmark.h>

#include "isde/prior.hpp"
#include "isde/score.hpp"
#include "isde/solvers.hpp"

using namespace isde;

namespace {

// Whole solves on the fOUVE Gaussian fixture; divide by range(1) for per-step cost.
// range(0) is the state dimension.
template <class Run>
void solve_bench(benchmark::State& state, Run run) {
  const InterpolatingSde sde{SdeParams{}};
  const auto dim = static_cast<Eigen::Index>(state.range(0));
  const auto steps = static_cast<std::size_t>(state.range(1));
  const AnalyticScore score(ToyPrior::gaussian(State::Constant(dim, 0.5), 0.04), sde);
  const State y = State::Ones(dim);
  const State x_T = State::Constant(dim, 1.07);
  const TimeGrid grid = TimeGrid::uniform(sde, steps);
  Rng rng(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run(sde, score, y, x_T, grid, rng).final_state.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * steps));
}

void BM_Isde1(benchmark::State& s) {
  solve_bench(s, [](auto& sde, auto& sc, auto& y, auto& x, auto& g, Rng& r) {
    return isde_solve(sde, sc, y, x, g, SolverSpec::isde(1, 0.1), r);
  });
}
void BM_Isde2(benchmark::State& s) {
  solve_bench(s, [](auto& sde, auto& sc, auto& y, auto& x, auto& g, Rng& r) {
    return isde_solve(sde, sc, y, x, g, SolverSpec::isde(2, 0.1), r);
  });
}
// Plan built once outside the loop, as the studies do for many trajectories.
void BM_Isde2Planned(benchmark::State& s) {
  const InterpolatingSde sde{SdeParams{}};
  const IsdePlan plan = IsdePlan::build(sde, TimeGrid::uniform(sde, s.range(1)), 2);
  solve_bench(s, [&plan](auto&, auto& sc, auto& y, auto& x, auto&, Rng& r) {
    return isde_solve(plan, sc, y, x, SolverSpec::isde(2, 0.1), r);
  });
}
void BM_EulerMaruyama(benchmark::State& s) {
  solve_bench(s, [](auto& sde, auto& sc, auto& y, auto& x, auto& g, Rng& r) {
    return euler_maruyama(sde, sc, y, x, g, 1.0, r);
  });
}
void BM_PredictorCorrector(benchmark::State& s) {
  solve_bench(s, [](auto& sde, auto& sc, auto& y, auto& x, auto& g, Rng& r) {
    return pc_sampler(sde, sc, y, x, g, 0.5, r);
  });
}
void BM_Rk2(benchmark::State& s) {
  solve_bench(s, [](auto& sde, auto& sc, auto& y, auto& x, auto& g, Rng&) {
    return rk2_midpoint(sde, sc, y, x, g);
  });
}
void BM_Rk45(benchmark::State& s) {
  solve_bench(s, [](auto& sde, auto& sc, auto& y, auto& x, auto& g, Rng&) {
    return rk45_adaptive(sde, sc, y, x, g.start(), g.stop());
  });
}

}  // namespace

#define SOLVER_ARGS ArgsProduct({{1, 64}, {10, 100}})
BENCHMARK(BM_Isde1)->SOLVER_ARGS;
BENCHMARK(BM_Isde2)->SOLVER_ARGS;
BENCHMARK(BM_Isde2Planned)->SOLVER_ARGS;
BENCHMARK(BM_EulerMaruyama)->SOLVER_ARGS;
BENCHMARK(BM_PredictorCorrector)->SOLVER_ARGS;
BENCHMARK(BM_Rk2)->SOLVER_ARGS;
BENCHMARK(BM_Rk45)->Args({1, 10})->Args({64, 10});
BENCHMARK_MAIN();
