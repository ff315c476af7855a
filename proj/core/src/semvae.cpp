#include "sfd/semvae.hpp"

#include <cmath>

#include "sfd/error.hpp"
#include "sfd/linalg.hpp"
#include "sfd/optim.hpp"

namespace sfd {
namespace {

Tensor init_weight(std::size_t in, std::size_t out, Rng& rng) {
  std::vector<double> w(in * out);
  const double sigma = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& x : w) x = sigma * rng.normal();
  return Tensor::param({in, out}, std::move(w));
}

Tensor init_bias(std::size_t out) {
  return Tensor::param({out}, std::vector<double>(out, 0.0));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_rows(matmul(x, w), b);
}

}  // namespace

SemVae::SemVae(const SemVaeConfig& cfg, Rng& init_rng) : cfg_(cfg) {
  if (cfg.in_dim == 0 || cfg.latent_dim == 0 || cfg.hidden == 0)
    throw contract_error("SemVae: zero-sized dimension");
  enc_in_ = {init_weight(cfg.in_dim, cfg.hidden, init_rng), init_bias(cfg.hidden)};
  for (std::size_t i = 0; i < cfg.blocks; ++i)
    enc_blocks_.push_back({{init_weight(cfg.hidden, cfg.hidden, init_rng), init_bias(cfg.hidden)},
                           {init_weight(cfg.hidden, cfg.hidden, init_rng), init_bias(cfg.hidden)}});
  enc_out_ = {init_weight(cfg.hidden, 2 * cfg.latent_dim, init_rng),
              init_bias(2 * cfg.latent_dim)};
  dec_in_ = {init_weight(cfg.latent_dim, cfg.hidden, init_rng), init_bias(cfg.hidden)};
  for (std::size_t i = 0; i < cfg.blocks; ++i)
    dec_blocks_.push_back({{init_weight(cfg.hidden, cfg.hidden, init_rng), init_bias(cfg.hidden)},
                           {init_weight(cfg.hidden, cfg.hidden, init_rng), init_bias(cfg.hidden)}});
  dec_out_ = {init_weight(cfg.hidden, cfg.in_dim, init_rng), init_bias(cfg.in_dim)};
}

Tensor SemVae::apply_trunk(Tensor h, const std::vector<Block>& blocks) const {
  for (const auto& blk : blocks) {
    Tensor u = silu(linear(layer_norm(h), blk.l1.w, blk.l1.b));
    h = h + linear(u, blk.l2.w, blk.l2.b);
  }
  return layer_norm(h);
}

GaussianPosterior SemVae::encode(const Tensor& features) const {
  if (features.rank() != 2 || features.cols() != cfg_.in_dim)
    throw shape_error("SemVae::encode: expected (L, " + std::to_string(cfg_.in_dim) + ") input");
  Tensor h = linear(features, enc_in_.w, enc_in_.b);
  h = apply_trunk(h, enc_blocks_);
  Tensor out = linear(h, enc_out_.w, enc_out_.b);
  Tensor mu = slice_cols(out, 0, cfg_.latent_dim);
  Tensor log_var =
      clamp(slice_cols(out, cfg_.latent_dim, 2 * cfg_.latent_dim), cfg_.logvar_min, cfg_.logvar_max);
  return {mu, log_var};
}

Tensor SemVae::decode(const Tensor& latent) const {
  if (latent.rank() != 2 || latent.cols() != cfg_.latent_dim)
    throw shape_error("SemVae::decode: expected (L, " + std::to_string(cfg_.latent_dim) +
                      ") input");
  Tensor h = linear(latent, dec_in_.w, dec_in_.b);
  h = apply_trunk(h, dec_blocks_);
  return linear(h, dec_out_.w, dec_out_.b);
}

void SemVae::freeze() {
  for (auto& [name, p] : named_params()) {
    Tensor t = p;
    t.set_requires_grad(false);
  }
  frozen_ = true;
}

std::vector<std::pair<std::string, Tensor>> SemVae::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto put = [&out](const std::string& name, const Linear& l) {
    out.emplace_back(name + ".w", l.w);
    out.emplace_back(name + ".b", l.b);
  };
  put("enc.in", enc_in_);
  for (std::size_t i = 0; i < enc_blocks_.size(); ++i) {
    put("enc.block" + std::to_string(i) + ".l1", enc_blocks_[i].l1);
    put("enc.block" + std::to_string(i) + ".l2", enc_blocks_[i].l2);
  }
  put("enc.out", enc_out_);
  put("dec.in", dec_in_);
  for (std::size_t i = 0; i < dec_blocks_.size(); ++i) {
    put("dec.block" + std::to_string(i) + ".l1", dec_blocks_[i].l1);
    put("dec.block" + std::to_string(i) + ".l2", dec_blocks_[i].l2);
  }
  put("dec.out", dec_out_);
  return out;
}

std::vector<Tensor> SemVae::params() const {
  std::vector<Tensor> out;
  for (auto& [name, p] : named_params()) out.push_back(p);
  return out;
}

void SemVae::load_params(const std::vector<std::pair<std::string, Tensor>>& src) {
  auto dst = named_params();
  if (src.size() != dst.size())
    throw contract_error("SemVae::load_params: parameter count mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (src[i].first != dst[i].first || src[i].second.shape() != dst[i].second.shape())
      throw contract_error("SemVae::load_params: mismatch at " + dst[i].first);
    Tensor t = dst[i].second;
    std::copy(src[i].second.values().begin(), src[i].second.values().end(), t.raw().begin());
  }
}

Tensor reparameterize(const GaussianPosterior& post, Rng& rng) {
  if (post.mu.shape() != post.log_var.shape())
    throw shape_error("reparameterize: mu/log_var shape mismatch");
  Tensor eps = Tensor::randn(post.mu.shape(), rng);
  return post.mu + exp_(mul_scalar(post.log_var, 0.5)) * eps;
}

SemVaeLoss semvae_loss(const Tensor& f_hat, const Tensor& f, const GaussianPosterior& post,
                       double lambda_kl) {
  if (f_hat.shape() != f.shape()) throw shape_error("semvae_loss: reconstruction shape mismatch");
  Tensor mse = mean_all(row_sum(square(f_hat - f)));
  // Per-row cosine; the 1e-16 floor under the squared norms keeps zero rows
  // and their gradients finite (effective epsilon 1e-8 in the denominator).
  Tensor dot = row_sum(f_hat * f);
  Tensor n1 = sqrt_(add_scalar(row_sum(square(f_hat)), 1e-16));
  Tensor n2 = sqrt_(add_scalar(row_sum(square(f)), 1e-16));
  Tensor cos_term = mean_all(1.0 - dot / (n1 * n2));
  Tensor kl = mul_scalar(
      mean_all(row_sum(square(post.mu) + exp_(post.log_var) - post.log_var + (-1.0))), 0.5);
  Tensor total = mse + cos_term + mul_scalar(kl, lambda_kl);
  return {total, mse, cos_term, kl};
}

SemVae train_semvae(const Tensor& features, const SemVaeConfig& cfg,
                    const SemVaeTrainConfig& train_cfg,
                    const std::function<void(std::size_t, const SemVaeLossValues&)>& log) {
  if (features.rank() != 2 || features.cols() != cfg.in_dim)
    throw shape_error("train_semvae: features must be (N, C_in)");
  const std::size_t n = features.rows();
  if (n == 0) throw contract_error("train_semvae: empty feature set");

  Rng master(train_cfg.seed);
  Rng init_rng = master.derive(0xE5C0DE);
  SemVae model(cfg, init_rng);
  AdamW opt(model.params(), train_cfg.lr, 0.9, 0.999, 1e-8, train_cfg.weight_decay);

  const auto fv = features.values();
  for (std::size_t iter = 0; iter < train_cfg.iters; ++iter) {
    Rng it = master.derive(iter + 1);
    std::vector<double> batch(train_cfg.batch * cfg.in_dim);
    for (std::size_t b = 0; b < train_cfg.batch; ++b) {
      const std::size_t row = it.next_u64() % n;
      for (std::size_t j = 0; j < cfg.in_dim; ++j)
        batch[b * cfg.in_dim + j] =
            fv[row * cfg.in_dim + j] + train_cfg.jitter * it.normal();
    }
    Tensor x = Tensor::from({train_cfg.batch, cfg.in_dim}, std::move(batch));
    GaussianPosterior post = model.encode(x);
    Tensor s = reparameterize(post, it);
    Tensor xhat = model.decode(s);
    SemVaeLoss loss = semvae_loss(xhat, x, post, train_cfg.lambda_kl);
    if (!std::isfinite(loss.total.item()))
      throw divergence_error("train_semvae: non-finite loss at iteration " + std::to_string(iter));
    opt.zero_grad();
    backward(loss.total);
    opt.step();
    if (log) log(iter, {loss.total.item(), loss.mse.item(), loss.cos.item(), loss.kl.item()});
  }
  model.freeze();
  return model;
}

// ---- PCA -----------------------------------------------------------------------

Pca fit_pca(const Tensor& x, std::size_t k) {
  if (x.rank() != 2) throw shape_error("fit_pca: expected (N, C) input");
  const std::size_t n = x.rows(), c = x.cols();
  if (k == 0 || k > c) throw contract_error("fit_pca: k must be in [1, C]");
  if (n < 2) throw contract_error("fit_pca: need at least two rows");

  std::vector<double> mean(c, 0.0);
  const auto xv = x.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) mean[j] += xv[i * c + j];
  for (auto& m : mean) m /= static_cast<double>(n);

  // Covariance with 1/N scaling, so N * sum of discarded eigenvalues equals
  // the total squared reconstruction error of the projection.
  std::vector<double> cov(c * c, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < c; ++a) {
      const double xa = xv[i * c + a] - mean[a];
      for (std::size_t b = a; b < c; ++b)
        cov[a * c + b] += xa * (xv[i * c + b] - mean[b]);
    }
  for (std::size_t a = 0; a < c; ++a)
    for (std::size_t b = a; b < c; ++b) {
      cov[a * c + b] /= static_cast<double>(n);
      cov[b * c + a] = cov[a * c + b];
    }

  EigResult eig = sym_eig(Tensor::from({c, c}, std::move(cov)));
  std::vector<double> comp(c * k);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < k; ++j) comp[i * k + j] = eig.eigenvectors.at(i, j);

  Pca pca;
  pca.mean = Tensor::from({c}, std::move(mean));
  pca.components = Tensor::from({c, k}, std::move(comp));
  pca.spectrum = eig.eigenvalues;
  pca.rank_deficient = eig.eigenvalues.at(k - 1) <= 1e-12;
  return pca;
}

Tensor Pca::project(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != mean.numel())
    throw shape_error("Pca::project: feature width mismatch");
  Tensor centered = sub(x, matmul(Tensor::full({x.rows(), 1}, 1.0),
                                  reshape(mean, {1, mean.numel()})));
  return matmul(centered, components);
}

Tensor Pca::reconstruct(const Tensor& y) const {
  if (y.rank() != 2 || y.cols() != components.cols())
    throw shape_error("Pca::reconstruct: latent width mismatch");
  return add(matmul(y, transpose(components)),
             matmul(Tensor::full({y.rows(), 1}, 1.0), reshape(mean, {1, mean.numel()})));
}

}  // namespace sfd
