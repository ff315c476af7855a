#include <doctest.h>

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "sfd/composite.hpp"
#include "sfd/dataset.hpp"
#include "sfd/error.hpp"
#include "sfd/rng.hpp"
#include "sfd/semvae.hpp"
#include "sfd/tensor.hpp"

using namespace sfd;
using sfd_test::max_grad_rel_err;

namespace {

SemVaeConfig tiny_cfg() {
  SemVaeConfig cfg;
  cfg.in_dim = 8;
  cfg.latent_dim = 3;
  cfg.hidden = 16;
  cfg.blocks = 2;
  return cfg;
}

}  // namespace

TEST_CASE("semvae: encode and decode shapes") {
  Rng init(1);
  const SemVae vae(tiny_cfg(), init);
  Rng rng(2);
  const Tensor f = Tensor::randn({5, 8}, rng);
  const GaussianPosterior post = vae.encode(f);
  CHECK(post.mu.rows() == 5);
  CHECK(post.mu.cols() == 3);
  CHECK(post.log_var.rows() == 5);
  CHECK(post.log_var.cols() == 3);
  const Tensor back = vae.decode(post.mu);
  CHECK(back.rows() == 5);
  CHECK(back.cols() == 8);
  CHECK_THROWS_AS((void)vae.encode(Tensor::zeros({2, 5})), shape_error);
  CHECK_THROWS_AS((void)vae.decode(Tensor::zeros({2, 5})), shape_error);
}

TEST_CASE("semvae: log-variance clamp honours the config bounds") {
  Rng init(3);
  const SemVae vae(tiny_cfg(), init);
  Rng rng(4);
  const Tensor f = Tensor::randn({16, 8}, rng, 50.0);  // extreme inputs
  const GaussianPosterior post = vae.encode(f);
  for (std::size_t i = 0; i < post.log_var.numel(); ++i) {
    CHECK(post.log_var.values()[i] >= -30.0);
    CHECK(post.log_var.values()[i] <= 20.0);
  }
}

TEST_CASE("reparameterize: s = mu + exp(logvar/2) * eps against a replayed stream") {
  GaussianPosterior post{Tensor::from({2, 3}, {1.0, -2.0, 0.5, 0.0, 3.0, -1.0}),
                         Tensor::from({2, 3}, {0.0, -1.0, 2.0, 0.5, -0.5, 1.0})};
  Rng rng(9);
  const Tensor s = reparameterize(post, rng);
  Rng replay(9);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const double eps = replay.normal();
      const double want =
          post.mu.at(i, j) + std::exp(0.5 * post.log_var.at(i, j)) * eps;
      CHECK(s.at(i, j) == doctest::Approx(want).epsilon(1e-15));
    }
}

TEST_CASE("semvae_loss: closed forms for every term") {
  // One row keeps the sums readable; values chosen for exact closed forms.
  const Tensor f = Tensor::from({1, 2}, {3.0, 4.0});
  const Tensor f_hat = Tensor::from({1, 2}, {4.0, 6.0});
  const GaussianPosterior post{Tensor::from({1, 2}, {1.0, -2.0}),
                               Tensor::from({1, 2}, {0.0, std::log(4.0)})};
  const double lambda_kl = 0.01;
  const SemVaeLoss loss = semvae_loss(f_hat, f, post, lambda_kl);

  // mse: (4-3)^2 + (6-4)^2 = 5
  CHECK(loss.mse.item() == doctest::Approx(5.0).epsilon(1e-12));
  // cosine: <f_hat, f> / (|f_hat||f|) = (12 + 24) / (sqrt(52) * 5)
  const double cos = 36.0 / (std::sqrt(52.0) * 5.0);
  CHECK(loss.cos.item() == doctest::Approx(1.0 - cos).epsilon(1e-12));
  // kl: 0.5 * sum(mu^2 + sigma^2 - log sigma^2 - 1)
  //   = 0.5 * ((1 + 1 - 0 - 1) + (4 + 4 - log 4 - 1))
  const double kl = 0.5 * (1.0 + 7.0 - std::log(4.0));
  CHECK(loss.kl.item() == doctest::Approx(kl).epsilon(1e-12));
  CHECK(loss.total.item() ==
        doctest::Approx(5.0 + (1.0 - cos) + lambda_kl * kl).epsilon(1e-12));
}

TEST_CASE("semvae_loss: standard-normal posterior has zero KL") {
  const Tensor f = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
  const GaussianPosterior post{Tensor::zeros({2, 2}), Tensor::zeros({2, 2})};
  const SemVaeLoss loss = semvae_loss(f, f, post, 1.0);
  CHECK(loss.kl.item() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(loss.mse.item() == 0.0);
  CHECK(loss.cos.item() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("semvae_loss: gradcheck through reconstruction and posterior") {
  Rng rng(5);
  const Tensor f = Tensor::randn({3, 4}, rng);
  const Tensor fh0 = Tensor::randn({3, 4}, rng);
  const Tensor mu0 = Tensor::randn({3, 2}, rng);
  const Tensor lv0 = Tensor::randn({3, 2}, rng);
  Tensor f_hat = Tensor::param({3, 4}, {fh0.values().begin(), fh0.values().end()});
  Tensor mu = Tensor::param({3, 2}, {mu0.values().begin(), mu0.values().end()});
  Tensor log_var = Tensor::param({3, 2}, {lv0.values().begin(), lv0.values().end()});
  auto loss = [&] { return semvae_loss(f_hat, f, {mu, log_var}, 0.3).total; };
  CHECK(max_grad_rel_err({f_hat, mu, log_var}, loss) < 1e-4);
}

TEST_CASE("semvae: freeze stops gradient flow into the parameters") {
  Rng init(6);
  SemVae vae(tiny_cfg(), init);
  Rng rng(7);
  const Tensor f = Tensor::randn({4, 8}, rng);

  backward(semvae_loss(vae.decode(vae.encode(f).mu), f, vae.encode(f), 1e-3).total);
  bool any_grad = false;
  for (const Tensor& p : vae.params()) any_grad = any_grad || p.has_grad();
  CHECK(any_grad);

  for (Tensor p : vae.params()) p.zero_grad();
  vae.freeze();
  CHECK(vae.frozen());
  backward(semvae_loss(vae.decode(vae.encode(f).mu), f, vae.encode(f), 1e-3).total);
  for (const Tensor& p : vae.params())
    for (const double g : p.grad()) CHECK(g == 0.0);
}

TEST_CASE("semvae: named parameter round trip restores the exact map") {
  Rng init(8);
  const SemVae a(tiny_cfg(), init);
  Rng init2(99);
  SemVae b(tiny_cfg(), init2);
  Rng rng(10);
  const Tensor f = Tensor::randn({3, 8}, rng);

  const Tensor before = b.encode(f).mu;
  b.load_params(a.named_params());
  const Tensor after_a = a.encode(f).mu;
  const Tensor after_b = b.encode(f).mu;
  bool changed = false;
  for (std::size_t i = 0; i < before.numel(); ++i) {
    changed = changed || (before.values()[i] != after_b.values()[i]);
    CHECK(after_b.values()[i] == after_a.values()[i]);
  }
  CHECK(changed);
}

TEST_CASE("train_semvae: loss decreases and the held-out fit beats the init") {
  // Real foundation features from the toy dataset keep this honest.
  ToyDataConfig dc;
  dc.n_train = 256;
  dc.n_test = 64;
  dc.seed = 3;
  const ToyDataset data = generate_toy(dc);
  const FoundationEncoder enc(dc.dim, 16, 7);
  const Tensor feats = enc.features(data.train_x);
  const Tensor held = enc.features(data.test_x);

  SemVaeConfig cfg;
  cfg.in_dim = 16;
  cfg.latent_dim = 4;
  cfg.hidden = 32;
  cfg.blocks = 2;
  SemVaeTrainConfig tc;
  tc.batch = 64;
  tc.iters = 400;
  tc.lr = 1e-3;
  tc.seed = 1;

  std::vector<double> totals;
  const SemVae vae = train_semvae(feats, cfg, tc,
                                  [&](std::size_t, const SemVaeLossValues& v) {
                                    totals.push_back(v.total);
                                  });
  REQUIRE(totals.size() == tc.iters);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 20; ++i) head += totals[static_cast<std::size_t>(i)];
  for (int i = 0; i < 20; ++i) tail += totals[totals.size() - 1 - static_cast<std::size_t>(i)];
  CHECK(tail < 0.5 * head);

  CHECK(vae.frozen());
  const double fit = semvae_loss(vae.decode(vae.encode(held).mu), held,
                                 vae.encode(held), 0.0)
                         .mse.item();
  Rng fresh_rng(123);
  const SemVae fresh(cfg, fresh_rng);
  const double fresh_fit = semvae_loss(fresh.decode(fresh.encode(held).mu), held,
                                       fresh.encode(held), 0.0)
                               .mse.item();
  CHECK(fit < 0.5 * fresh_fit);
}

TEST_CASE("train_semvae: identical seeds give identical models") {
  Rng rng(11);
  const Tensor feats = Tensor::randn({128, 8}, rng);
  SemVaeConfig cfg = tiny_cfg();
  SemVaeTrainConfig tc;
  tc.batch = 32;
  tc.iters = 50;
  tc.seed = 4;
  const SemVae a = train_semvae(feats, cfg, tc);
  const SemVae b = train_semvae(feats, cfg, tc);
  const auto pa = a.named_params(), pb = b.named_params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    for (std::size_t j = 0; j < pa[i].second.numel(); ++j)
      CHECK(pa[i].second.values()[j] == pb[i].second.values()[j]);
  }
}

// ---- pca ---------------------------------------------------------------------------

TEST_CASE("fit_pca: reconstruction error equals the discarded spectrum") {
  Rng rng(12);
  const std::size_t n = 200, d = 6, k = 2;
  // Anisotropic cloud: stretch two directions so the top-k split is clean.
  std::vector<double> raw(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double scale = (j == 0) ? 5.0 : (j == 1) ? 3.0 : 0.5;
      raw[i * d + j] = scale * rng.normal() + static_cast<double>(j);
    }
  const Tensor x = Tensor::from({n, d}, raw);
  const Pca pca = fit_pca(x, k);
  CHECK_FALSE(pca.rank_deficient);

  // Mean reconstruction error (sum over features) must equal the sum of the
  // discarded covariance eigenvalues.
  const Tensor rec = pca.reconstruct(pca.project(x));
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = rec.at(i, j) - x.at(i, j);
      err += delta * delta;
    }
  err /= static_cast<double>(n);
  double discarded = 0.0;
  for (std::size_t j = k; j < d; ++j) discarded += pca.spectrum.at(j);
  CHECK(err == doctest::Approx(discarded).epsilon(1e-9));

  // Orthonormal columns.
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t q = 0; q < k; ++q) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        dot += pca.components.at(j, p) * pca.components.at(j, q);
      CHECK(dot == doctest::Approx(p == q ? 1.0 : 0.0).epsilon(1e-10));
    }
}

TEST_CASE("fit_pca: exact recovery of a 2-dimensional subspace") {
  Rng rng(13);
  const std::size_t n = 64, d = 5;
  // Points on a plane spanned by two fixed directions (plus an offset).
  std::vector<double> raw(n * d);
  const double u[] = {1.0, 0.0, 1.0, 0.0, 0.0};
  const double v[] = {0.0, 1.0, 0.0, -1.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.normal(), b = rng.normal();
    for (std::size_t j = 0; j < d; ++j) raw[i * d + j] = 2.0 + a * u[j] + b * v[j];
  }
  const Tensor x = Tensor::from({n, d}, raw);
  const Pca pca = fit_pca(x, 2);
  const Tensor rec = pca.reconstruct(pca.project(x));
  for (std::size_t i = 0; i < n * d; ++i)
    CHECK(rec.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-8));
}

TEST_CASE("fit_pca: rank deficiency is flagged") {
  // All points on a line, but k = 2 requested.
  const std::size_t n = 32;
  std::vector<double> raw(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    raw[i * 3 + 0] = t;
    raw[i * 3 + 1] = 2.0 * t;
    raw[i * 3 + 2] = -t;
  }
  const Pca pca = fit_pca(Tensor::from({n, 3}, raw), 2);
  CHECK(pca.rank_deficient);

  Rng rng(14);
  const Pca ok = fit_pca(Tensor::randn({64, 3}, rng), 2);
  CHECK_FALSE(ok.rank_deficient);
}
