#include <benchmark/benchmark.h>

#include "isde/quadrature.hpp"
#include "isde/solvers.hpp"
#include "isde/weights.hpp"

using namespace isde;

namespace {

InterpolatingSde sde_of(SdeKind kind) {
  SdeParams p;
  p.kind = kind;
  return make_sde(p);
}

void BM_OmegaClosedForm(benchmark::State& state) {
  const auto sde = sde_of(SdeKind::kFOUVE);
  for (auto _ : state) benchmark::DoNotOptimize(omega_weight(sde, 1, 0.8, 0.7, WeightMethod::kClosedForm));
}

void BM_OmegaQuadrature(benchmark::State& state) {
  const auto sde = sde_of(SdeKind::kFOUVE);
  for (auto _ : state) benchmark::DoNotOptimize(omega_weight(sde, 1, 0.8, 0.7, WeightMethod::kQuadrature));
}

void BM_ItoBbed(benchmark::State& state) {
  const auto sde = sde_of(SdeKind::kBBED);
  for (auto _ : state) benchmark::DoNotOptimize(ito_increment(sde, 0.8, 0.7));
}

// Full plan for a 100-step grid: closed form (fOUVE) against quadrature (BBED).
void BM_PlanFouve(benchmark::State& state) {
  const auto sde = sde_of(SdeKind::kFOUVE);
  const TimeGrid grid = TimeGrid::uniform(sde, 100);
  for (auto _ : state) benchmark::DoNotOptimize(IsdePlan::build(sde, grid, 2).steps().data());
}

void BM_PlanBbed(benchmark::State& state) {
  const auto sde = sde_of(SdeKind::kBBED);
  const TimeGrid grid = TimeGrid::uniform(sde, 100);
  for (auto _ : state) benchmark::DoNotOptimize(IsdePlan::build(sde, grid, 2).steps().data());
}

void BM_GaussKronrodSmooth(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate([](double x) { return std::exp(11.2 * x); }, 0.5, 1.0).value);
  }
}

}  // namespace

BENCHMARK(BM_OmegaClosedForm);
BENCHMARK(BM_OmegaQuadrature);
BENCHMARK(BM_ItoBbed);
BENCHMARK(BM_PlanFouve);
BENCHMARK(BM_PlanBbed);
BENCHMARK(BM_GaussKronrodSmooth);
