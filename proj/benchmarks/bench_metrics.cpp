#include <benchmark/benchmark.h>

#include "sfd/eval.hpp"
#include "sfd/rng.hpp"
#include "sfd/tensor.hpp"

namespace {

void bm_mmd(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  sfd::Rng rng(2);
  const sfd::Tensor a = sfd::Tensor::randn({n, 2}, rng);
  const sfd::Tensor b = sfd::Tensor::randn({n, 2}, rng);
  for (auto _ : state) {
    double v = sfd::mmd_rbf(a, b, 1.0);
    benchmark::DoNotOptimize(v);
  }
}

void bm_frechet(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  sfd::Rng rng(2);
  const sfd::Tensor a = sfd::Tensor::randn({n, 8}, rng);
  const sfd::Tensor b = sfd::Tensor::randn({n, 8}, rng);
  for (auto _ : state) {
    double v = sfd::frechet_gaussian(a, b);
    benchmark::DoNotOptimize(v);
  }
}

}  // namespace

BENCHMARK(bm_mmd)->Arg(256)->Arg(1024);
BENCHMARK(bm_frechet)->Arg(1024)->Arg(4096);

BENCHMARK_MAIN();
