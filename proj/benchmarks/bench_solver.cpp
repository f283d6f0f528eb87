#include <benchmark/benchmark.h>

#include "tfr/datagen.hpp"
#include "tfr/solver.hpp"

namespace {

void solve_scenario(benchmark::State& state, const char* name) {
  const tfr::ScenarioSpec spec = tfr::scenario_template(name, static_cast<int>(state.range(0)));
  const auto sources = tfr::draw_sources(spec, 42);
  const tfr::Grid grid = spec.grid();
  for (auto _ : state) {
    auto r = tfr::solve_steady(grid, sources, spec.boundary, spec.conductivity, spec.solver);
    benchmark::DoNotOptimize(r.field.values.data());
  }
}

void BM_SolveHSink(benchmark::State& state) { solve_scenario(state, "HSink"); }
void BM_SolveNonlinear(benchmark::State& state) { solve_scenario(state, "NewScenario"); }

}  // namespace

BENCHMARK(BM_SolveHSink)->Arg(32)->Arg(64)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolveNonlinear)->Arg(64)->Unit(benchmark::kMillisecond);
