#include <benchmark/benchmark.h>

#include "tfr/model.hpp"
#include "tfr/nn/spectral.hpp"
#include "tfr/rng.hpp"

namespace {

tfr::nn::Tensor random_tensor(int c, int h, int w, std::uint64_t seed) {
  tfr::Rng rng(seed);
  tfr::nn::Tensor t(c, h, w);
  for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_SpectralConv(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto plan = tfr::nn::SpectralPlan::make(n, n, 12, 12);
  const auto u = random_tensor(32, n, n, 1);
  const auto w = tfr::nn::identity_spectral_weights(12, 12, 32);
  for (auto _ : state) {
    auto y = tfr::nn::spectral_conv(u, w, plan);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void model_pass(benchmark::State& state, tfr::Architecture arch) {
  tfr::ModelConfig cfg;
  cfg.arch = arch;
  cfg.height = cfg.width = static_cast<int>(state.range(0));
  tfr::Model model(cfg);
  const int ch = cfg.input_channels();
  tfr::ModelInput in{random_tensor(ch, cfg.height, cfg.width, 2), random_tensor(ch, cfg.height, cfg.width, 3),
                     random_tensor(1, cfg.height, cfg.width, 4)};
  const auto gy = random_tensor(1, cfg.height, cfg.width, 5);
  for (auto _ : state) {
    tfr::ForwardCache cache;
    auto y = model.forward(in, cache);
    model.backward(cache, gy);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void BM_IptrForwardBackward(benchmark::State& state) { model_pass(state, tfr::Architecture::iptr); }
void BM_VorUnetForwardBackward(benchmark::State& state) { model_pass(state, tfr::Architecture::vor_unet); }
void BM_VorFnoForwardBackward(benchmark::State& state) { model_pass(state, tfr::Architecture::vor_fno); }

}  // namespace

BENCHMARK(BM_SpectralConv)->Arg(32)->Arg(64);
BENCHMARK(BM_IptrForwardBackward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VorUnetForwardBackward)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VorFnoForwardBackward)->Arg(64)->Unit(benchmark::kMillisecond);
