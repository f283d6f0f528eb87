#include <benchmark/benchmark.h>

#include "tfr/encoding.hpp"

namespace {

void BM_VoronoiEncode(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const tfr::Grid grid = tfr::make_grid(n, n, 0.1, 0.1);
  tfr::Readings r;
  r.layout = tfr::uniform_sensor_layout(grid, static_cast<int>(state.range(1)));
  r.values.assign(r.layout.size(), 300.0);
  for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] += static_cast<double>(i);
  for (auto _ : state) {
    auto p = tfr::voronoi_encode(r, grid);
    benchmark::DoNotOptimize(p.values.data());
  }
}

}  // namespace

BENCHMARK(BM_VoronoiEncode)->Args({64, 25})->Args({200, 25})->Args({200, 100});
