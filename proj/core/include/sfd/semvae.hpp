#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sfd/rng.hpp"
#include "sfd/tensor.hpp"

namespace sfd {

struct GaussianPosterior {
  Tensor mu;       // (L, C_s)
  Tensor log_var;  // (L, C_s), clamped to [-30, 20]
};

struct SemVaeConfig {
  std::size_t in_dim = 64;      // foundation feature width C_in
  std::size_t latent_dim = 16;  // C_s
  std::size_t hidden = 64;
  std::size_t blocks = 4;
  double logvar_min = -30.0;
  double logvar_max = 20.0;
};

// Variational compressor for foundation features: residual MLP encoder to a
// diagonal Gaussian over the semantic latent, mirrored decoder back to
// feature space.  After train_semvae the parameters are frozen.
class SemVae {
 public:
  SemVae(const SemVaeConfig& cfg, Rng& init_rng);

  GaussianPosterior encode(const Tensor& features) const;  // (L,C_in) -> posterior
  Tensor decode(const Tensor& latent) const;               // (L,C_s) -> (L,C_in)

  const SemVaeConfig& config() const { return cfg_; }
  bool frozen() const { return frozen_; }
  void freeze();

  // Named parameters in fixed declaration order (checkpoint order).
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> params() const;
  void load_params(const std::vector<std::pair<std::string, Tensor>>& src);

 private:
  struct Linear {
    Tensor w, b;
  };
  struct Block {
    Linear l1, l2;
  };
  Tensor apply_trunk(Tensor h, const std::vector<Block>& blocks) const;

  SemVaeConfig cfg_;
  Linear enc_in_, enc_out_, dec_in_, dec_out_;
  std::vector<Block> enc_blocks_, dec_blocks_;
  bool frozen_ = false;
};

// s = mu + sigma * eps with eps ~ N(0, I) drawn from rng.
Tensor reparameterize(const GaussianPosterior& post, Rng& rng);

struct SemVaeLoss {
  Tensor total;  // mse + (1 - cos) + lambda_kl * kl
  Tensor mse;    // mean over rows, sum over features
  Tensor cos;    // mean over rows of (1 - cosine similarity)
  Tensor kl;     // mean over rows of 0.5 * sum(mu^2 + sigma^2 - log sigma^2 - 1)
};

SemVaeLoss semvae_loss(const Tensor& f_hat, const Tensor& f, const GaussianPosterior& post,
                       double lambda_kl);

struct SemVaeTrainConfig {
  std::size_t batch = 128;
  std::size_t iters = 2000;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double lambda_kl = 1e-7;
  double jitter = 0.01;  // Gaussian feature jitter, the desk-scale augmentation
  std::uint64_t seed = 0;
};

struct SemVaeLossValues {
  double total, mse, cos, kl;
};

// Trains on feature rows (N, C_in) and returns the frozen model.  The
// callback receives per-iteration loss values for logging.
SemVae train_semvae(const Tensor& features, const SemVaeConfig& cfg,
                    const SemVaeTrainConfig& train_cfg,
                    const std::function<void(std::size_t, const SemVaeLossValues&)>& log = {});

// ---- PCA baseline compressor -------------------------------------------------

struct Pca {
  Tensor mean;        // {C}
  Tensor components;  // (C, k), orthonormal columns
  Tensor spectrum;    // {C}, all covariance eigenvalues, descending
  bool rank_deficient = false;  // fewer than k informative directions

  Tensor project(const Tensor& x) const;      // (N,C) -> (N,k)
  Tensor reconstruct(const Tensor& y) const;  // (N,k) -> (N,C)
};

// Top-k eigenvectors of the (1/N-scaled) feature covariance.  On rank
// deficiency the remaining directions come from the orthonormal completion
// produced by the eigensolver and rank_deficient is set.
Pca fit_pca(const Tensor& x, std::size_t k);

}  // namespace sfd
