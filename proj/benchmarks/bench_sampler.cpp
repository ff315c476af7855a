#include <benchmark/benchmark.h>

#include "sfd/denoiser.hpp"
#include "sfd/eval.hpp"
#include "sfd/rng.hpp"
#include "sfd/scheduler.hpp"

namespace {

sfd::DenoiserConfig small_model() {
  sfd::DenoiserConfig cfg;
  cfg.sem_dim = 8;
  cfg.tex_dim = 2;
  cfg.feature_dim = 32;
  cfg.hidden = 64;
  cfg.blocks = 3;
  cfg.num_classes = 8;
  cfg.time_freqs = 16;
  cfg.repa_depth = 2;
  return cfg;
}

void bm_euler_sampler(benchmark::State& state) {
  sfd::Rng rng(3);
  const sfd::Denoiser model(small_model(), rng);
  sfd::SamplerConfig cfg;
  cfg.steps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    sfd::CompositeLatent x = sfd::sample_one(model, 0, sfd::Rng(11), cfg);
    benchmark::DoNotOptimize(x.tex.values().data());
  }
}

void bm_class_balanced(benchmark::State& state) {
  sfd::Rng rng(3);
  const sfd::Denoiser model(small_model(), rng);
  sfd::SamplerConfig cfg;
  cfg.steps = 32;
  const std::size_t per_class = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    sfd::GeneratedSamples g = sfd::class_balanced_generate(model, cfg, per_class, 5);
    benchmark::DoNotOptimize(g.tex.values().data());
  }
}

}  // namespace

BENCHMARK(bm_euler_sampler)->Arg(32)->Arg(100);
BENCHMARK(bm_class_balanced)->Arg(8)->Arg(32);
