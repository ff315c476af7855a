#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sfd/checkpoint.hpp"
#include "sfd/composite.hpp"
#include "sfd/denoiser.hpp"
#include "sfd/error.hpp"
#include "sfd/optim.hpp"
#include "sfd/rng.hpp"
#include "sfd/scheduler.hpp"
#include "sfd/semvae.hpp"
#include "sfd/tensor.hpp"

namespace sfd {

// ---------------------------------------------------------------------------
// Dual-time flow-matching training: per sample, the clean pair (s1, z1) is
// built from frozen components, noised at its own (t_sem, t_tex), and the
// model regresses both velocities plus an alignment term on the hidden tap.
//   total = loss_z + beta * loss_s + lambda_repa * loss_repa
// ---------------------------------------------------------------------------

enum class TimeSampler { logit_normal, uniform };

TimeSampler parse_time_sampler(const std::string& name);  // contract_error otherwise

struct TrainConfig {
  double delta_t = 0.3;
  double beta = 2.0;         // semantic velocity weight
  double lambda_repa = 1.0;  // alignment weight
  double lambda_kl = 1e-7;   // compressor KL weight, echoed for pipeline runs
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::size_t batch = 128;
  std::size_t iters = 5000;
  TimeSampler time_sampler = TimeSampler::logit_normal;
  double logit_loc = 0.0;
  double logit_scale = 1.0;
  RepaLoss repa_loss = RepaLoss::cosine_mse;
  double label_drop = 0.1;  // per-row probability of the null label
  std::size_t log_every = 50;
  std::size_t checkpoint_every = 1000;
  std::uint64_t seed = 0;
};

void check_train_config(const TrainConfig& cfg);  // contract_error on bad ranges

// Frozen semantic compressor seam: the variational encoder or the PCA
// baseline, interchangeable at equal latent width.
class SemanticCompressor {
 public:
  virtual ~SemanticCompressor() = default;
  virtual std::size_t in_dim() const = 0;
  virtual std::size_t latent_dim() const = 0;
  virtual std::string kind() const = 0;  // "semvae" | "pca"

  // (B, C_in) -> (B, C_s); stochastic encoders draw from rng.
  virtual Tensor encode_latent(const Tensor& features, Rng& rng) const = 0;
  // (B, C_s) -> (B, C_in), for reconstruction probes.
  virtual Tensor decode_features(const Tensor& latent) const = 0;

  virtual void save_into(Archive& a) const = 0;
};

class SemVaeCompressor final : public SemanticCompressor {
 public:
  explicit SemVaeCompressor(SemVae vae);
  std::size_t in_dim() const override;
  std::size_t latent_dim() const override;
  std::string kind() const override { return "semvae"; }
  Tensor encode_latent(const Tensor& features, Rng& rng) const override;
  Tensor decode_features(const Tensor& latent) const override;
  void save_into(Archive& a) const override;
  const SemVae& vae() const { return vae_; }

 private:
  SemVae vae_;
};

class PcaCompressor final : public SemanticCompressor {
 public:
  explicit PcaCompressor(Pca pca);
  std::size_t in_dim() const override;
  std::size_t latent_dim() const override;
  std::string kind() const override { return "pca"; }
  Tensor encode_latent(const Tensor& features, Rng& rng) const override;
  Tensor decode_features(const Tensor& latent) const override;
  void save_into(Archive& a) const override;
  const Pca& pca() const { return pca_; }

 private:
  Pca pca_;
};

// Compressor checkpoint: kind tag + parameters; format_error on unknown kind.
void save_compressor(const SemanticCompressor& c, const std::string& path);
std::unique_ptr<SemanticCompressor> load_compressor(const std::string& path);

// One training batch, fully materialized.  All randomness comes from
// substreams derived as (seed, iteration) -> iter stream, then per sample
// index, so the batch is independent of evaluation order.
struct SfdBatch {
  CompositeLatent noisy;       // blocks at their own times
  Tensor target_sem;           // s1 - s0, (B, C_s)
  Tensor target_tex;           // z1 - z0, (B, C_z)
  std::vector<double> t_sem;   // per-row times
  std::vector<double> t_tex;
  std::vector<int> labels;     // after null-label dropout
  Tensor y_star;               // (B, C_in) frozen alignment targets
};

SfdBatch prepare_sfd_batch(const Tensor& x1, const std::vector<int>& labels,
                           const FoundationEncoder& foundation,
                           const SemanticCompressor& compressor, const TrainConfig& cfg,
                           const Rng& iter_rng);

struct SfdLoss {
  Tensor total;  // loss_z + beta * loss_s + lambda_repa * loss_repa
  Tensor loss_z;
  Tensor loss_s;
  Tensor loss_repa;
};

struct SfdLossValues {
  double total = 0.0, loss_z = 0.0, loss_s = 0.0, loss_repa = 0.0;
};

// Loss from a forward pass already taken on `batch`.
SfdLoss sfd_loss_from_output(const Denoiser::Output& out, const SfdBatch& batch,
                             const Denoiser::RepaHead& head, const TrainConfig& cfg);

// Convenience: batch construction + forward + loss, randomness drawn from
// (cfg.seed, iteration).  Non-finite total raises divergence_error.
SfdLoss sfd_loss(const Tensor& x1, const std::vector<int>& labels, const Denoiser& model,
                 const FoundationEncoder& foundation, const SemanticCompressor& compressor,
                 const TrainConfig& cfg, std::size_t iteration);

// ---- checkpointing ----------------------------------------------------------

constexpr std::uint64_t kCheckpointVersion = 1;

void save_sfd_checkpoint(const std::string& path, const Denoiser& model, const AdamW& opt,
                         std::size_t iteration, const TrainConfig& cfg,
                         const std::string& config_echo);

struct SfdCheckpointInfo {
  std::size_t iteration = 0;
  std::uint64_t seed = 0;
  double delta_t = 0.3;
  std::string config_echo;
};

// Restores parameters and optimizer state in place; model shape must match.
SfdCheckpointInfo load_sfd_checkpoint(const std::string& path, Denoiser& model, AdamW& opt);
SfdCheckpointInfo peek_sfd_checkpoint(const std::string& path);  // metadata only

// ---- the loop ----------------------------------------------------------------

struct TrainLogRow {
  std::size_t iteration = 0;  // 1-based, the step just completed
  SfdLossValues loss;
  double wall_ms = 0.0;  // wall time since the previous row; excluded from
                         // byte-identical guarantees
};

struct TrainSfdResult {
  std::vector<TrainLogRow> log;
  SfdLossValues final_loss;
};

// Runs iterations [start_iter, cfg.iters).  `log_path` (CSV) and
// `checkpoint_path` may be empty to skip the artifact.  Deterministic given
// (cfg, start state): resuming from a checkpoint at k reproduces the
// uninterrupted run bit for bit.
TrainSfdResult train_sfd(const TrainConfig& cfg, Denoiser& model, AdamW& opt,
                         const FoundationEncoder& foundation,
                         const SemanticCompressor& compressor, const Tensor& train_x,
                         const std::vector<int>& train_y, std::size_t start_iter = 0,
                         const std::string& log_path = "",
                         const std::string& checkpoint_path = "",
                         const std::string& config_echo = "");

}  // namespace sfd
