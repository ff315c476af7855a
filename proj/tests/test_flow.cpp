#include <doctest.h>

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "sfd/error.hpp"
#include "sfd/flow.hpp"
#include "sfd/rng.hpp"
#include "sfd/tensor.hpp"

using namespace sfd;
using sfd_test::max_grad_rel_err;

TEST_CASE("interpolate: endpoints and midpoint") {
  Rng rng(1);
  const Tensor x0 = Tensor::randn({3, 4}, rng);
  const Tensor x1 = Tensor::randn({3, 4}, rng);

  const Tensor at0 = interpolate(x0, x1, 0.0);
  const Tensor at1 = interpolate(x0, x1, 1.0);
  const Tensor mid = interpolate(x0, x1, 0.5);
  for (std::size_t i = 0; i < x0.numel(); ++i) {
    CHECK(at0.values()[i] == x0.values()[i]);
    CHECK(at1.values()[i] == x1.values()[i]);
    CHECK(mid.values()[i] ==
          doctest::Approx(0.5 * (x0.values()[i] + x1.values()[i])).epsilon(1e-15));
  }
}

TEST_CASE("interpolate: t outside [0,1] rejected") {
  const Tensor x = Tensor::zeros({1, 2});
  CHECK_THROWS_AS((void)interpolate(x, x, -0.01), contract_error);
  CHECK_THROWS_AS((void)interpolate(x, x, 1.01), contract_error);
}

TEST_CASE("interpolate_rows: each row follows its own clock") {
  Rng rng(2);
  const Tensor x0 = Tensor::randn({4, 3}, rng);
  const Tensor x1 = Tensor::randn({4, 3}, rng);
  const std::vector<double> t{0.0, 0.25, 0.75, 1.0};
  const Tensor xt = interpolate_rows(x0, x1, t);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(xt.at(i, j) ==
            doctest::Approx(t[i] * x1.at(i, j) + (1.0 - t[i]) * x0.at(i, j))
                .epsilon(1e-15));
}

TEST_CASE("interpolate_rows: time count must match batch") {
  const Tensor x = Tensor::zeros({3, 2});
  const std::vector<double> t{0.5, 0.5};
  CHECK_THROWS_AS((void)interpolate_rows(x, x, t), shape_error);
}

TEST_CASE("velocity_target: constant difference, independent of t") {
  Rng rng(3);
  const Tensor x0 = Tensor::randn({2, 5}, rng);
  const Tensor x1 = Tensor::randn({2, 5}, rng);
  const Tensor v = velocity_target(x0, x1);
  for (std::size_t i = 0; i < x0.numel(); ++i)
    CHECK(v.values()[i] == doctest::Approx(x1.values()[i] - x0.values()[i]).epsilon(1e-15));

  // Finite-difference of the path reproduces the target at any interior t.
  const double h = 1e-6;
  const Tensor lo = interpolate(x0, x1, 0.4 - h);
  const Tensor hi = interpolate(x0, x1, 0.4 + h);
  for (std::size_t i = 0; i < x0.numel(); ++i)
    CHECK((hi.values()[i] - lo.values()[i]) / (2 * h) ==
          doctest::Approx(v.values()[i]).epsilon(1e-7));
}

TEST_CASE("velocity_loss: matches the scalar double loop") {
  Rng rng(4);
  const Tensor pred = Tensor::randn({6, 3}, rng);
  const Tensor target = Tensor::randn({6, 3}, rng);
  double want = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double d = pred.at(i, j) - target.at(i, j);
      row += d * d;
    }
    want += row;
  }
  want /= 6.0;
  CHECK(velocity_loss(pred, target).item() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("velocity_loss: zero at a perfect prediction, positive otherwise") {
  Rng rng(5);
  const Tensor t = Tensor::randn({4, 4}, rng);
  CHECK(velocity_loss(t, t).item() == 0.0);
  CHECK(velocity_loss(add_scalar(t, 0.1), t).item() > 0.0);
}

TEST_CASE("velocity_loss: gradcheck through the prediction") {
  Rng rng(6);
  const Tensor raw = Tensor::randn({3, 4}, rng);
  Tensor pred = Tensor::param({3, 4}, {raw.values().begin(), raw.values().end()});
  const Tensor target = Tensor::randn({3, 4}, rng);
  CHECK(max_grad_rel_err({pred}, [&] { return velocity_loss(pred, target); }) < 1e-4);
}

TEST_CASE("sample_time_logit_normal: range, determinism, median") {
  Rng a(7), b(7);
  const int n = 200000;
  int below_half = 0;
  for (int i = 0; i < n; ++i) {
    const double t = sample_time_logit_normal(a);
    CHECK(t > 0.0);
    CHECK(t < 1.0);
    CHECK(t == sample_time_logit_normal(b));
    if (t < 0.5) ++below_half;
  }
  // loc = 0 puts the median at sigmoid(0) = 1/2.
  CHECK(static_cast<double>(below_half) / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("sample_time_logit_normal: loc shifts the median, scale must be positive") {
  Rng rng(8);
  const int n = 100000;
  int below = 0;
  const double loc = 1.0;
  for (int i = 0; i < n; ++i)
    if (sample_time_logit_normal(rng, loc, 0.8) < 1.0 / (1.0 + std::exp(-loc))) ++below;
  CHECK(static_cast<double>(below) / n == doctest::Approx(0.5).epsilon(0.02));

  Rng r2(9);
  CHECK_THROWS_AS((void)sample_time_logit_normal(r2, 0.0, 0.0), contract_error);
  CHECK_THROWS_AS((void)sample_time_logit_normal(r2, 0.0, -1.0), contract_error);
}
