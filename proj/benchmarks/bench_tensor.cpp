#include <benchmark/benchmark.h>

#include "sfd/rng.hpp"
#include "sfd/tensor.hpp"

namespace {

void bm_matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  sfd::Rng rng(1);
  const sfd::Tensor a = sfd::Tensor::randn({n, n}, rng);
  const sfd::Tensor b = sfd::Tensor::randn({n, n}, rng);
  for (auto _ : state) {
    sfd::Tensor c = sfd::matmul(a, b);
    benchmark::DoNotOptimize(c.values().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(2 * n * n * n));
}

sfd::Tensor random_param(std::size_t r, std::size_t c, sfd::Rng& rng, double sigma) {
  const sfd::Tensor t = sfd::Tensor::randn({r, c}, rng, sigma);
  return sfd::Tensor::param({r, c}, {t.values().begin(), t.values().end()});
}

void bm_forward_backward(benchmark::State& state) {
  const std::size_t b = 128, h = static_cast<std::size_t>(state.range(0));
  sfd::Rng rng(1);
  sfd::Tensor w1 = random_param(h, h, rng, 0.05);
  sfd::Tensor w2 = random_param(h, h, rng, 0.05);
  const sfd::Tensor x = sfd::Tensor::randn({b, h}, rng);
  for (auto _ : state) {
    sfd::Tensor y = sfd::mean_all(sfd::square(sfd::matmul(sfd::silu(sfd::matmul(x, w1)), w2)));
    w1.zero_grad();
    w2.zero_grad();
    sfd::backward(y);
    benchmark::DoNotOptimize(w1.grad_raw().data());
  }
}

}  // namespace

BENCHMARK(bm_matmul)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_forward_backward)->Arg(64)->Arg(128);
