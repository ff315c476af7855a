#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sfd/composite.hpp"
#include "sfd/rng.hpp"
#include "sfd/tensor.hpp"

namespace sfd {

// Sinusoidal features for t in [0,1]: n geometric frequency pairs covering
// periods 1..1e4 on the millitime scale (t * 1000), sin block then cos block.
Tensor sinusoidal_features(std::span<const double> t, std::size_t n_pairs);

enum class RepaLoss { cosine, mse, cosine_mse };
RepaLoss parse_repa_loss(const std::string& name);  // contract_error on unknown

struct DenoiserConfig {
  std::size_t sem_dim = 16;      // C_s
  std::size_t tex_dim = 2;       // C_z
  std::size_t feature_dim = 64;  // C_in, width of the alignment target
  std::size_t hidden = 128;      // H (must be even: two H/2 time embedders)
  std::size_t blocks = 4;
  std::size_t num_classes = 8;   // class table has num_classes + 1 rows (last = null)
  std::size_t time_freqs = 32;   // sinusoidal frequency pairs per embedder
  std::size_t repa_depth = 2;    // 1-based block index of the hidden tap
};

// Velocity network over the composite latent.  Residual MLP blocks with
// shift/scale modulation from the conditioning vector (dual-time embedding
// plus class embedding); two zero-initialized output heads predict the
// semantic and texture velocities; a linear projection head exposes the
// hidden tap for feature alignment.
class Denoiser {
 public:
  Denoiser(const DenoiserConfig& cfg, Rng& init_rng);

  struct Output {
    Tensor v_sem;  // (B, C_s)
    Tensor v_tex;  // (B, C_z)
    Tensor tap;    // (B, H), activation after block repa_depth
  };

  // Per-row times in [0,1] and labels in [0, num_classes] (num_classes is
  // the null label).  Pure function of parameters and inputs.
  Output forward(const CompositeLatent& c, std::span<const double> t_sem,
                 std::span<const double> t_tex, std::span<const int> labels) const;
  Output forward(const CompositeLatent& c, double t_sem, double t_tex, int label) const;

  // Concatenated dual-time embedding [tau_s(t_s) | tau_z(t_z)], width H.
  Tensor time_embedding(std::span<const double> t_sem, std::span<const double> t_tex) const;

  struct RepaHead {
    Tensor w;  // (H, C_in)
    Tensor b;  // {C_in}
  };
  const RepaHead& repa_head() const { return repa_head_; }

  const DenoiserConfig& config() const { return cfg_; }
  int null_label() const { return static_cast<int>(cfg_.num_classes); }

  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> params() const;
  void load_params(const std::vector<std::pair<std::string, Tensor>>& src);
  void freeze();

 private:
  struct Linear {
    Tensor w, b;
  };
  struct Block {
    Linear mod_scale, mod_shift;  // conditioning -> modulation
    Linear l1, l2;                // residual MLP
  };
  struct TimeEmbedder {
    Linear l1, l2;  // (2*time_freqs) -> H/2 -> H/2
  };
  Tensor embed_one(const TimeEmbedder& emb, std::span<const double> t) const;

  DenoiserConfig cfg_;
  Linear in_proj_;
  TimeEmbedder tau_sem_, tau_tex_;
  Tensor class_table_;  // (num_classes + 1, H)
  std::vector<Block> blocks_;
  Linear head_sem_, head_tex_;  // zero-initialized
  RepaHead repa_head_;
};

// Dissimilarity between the projected tap and the alignment target y_star
// (B, C_in).  cosine: mean over rows of (1 - cos); mse: mean over rows of the
// summed squared error; cosine_mse: their sum.
Tensor repa_align(const Tensor& h_tap, const Tensor& y_star, const Denoiser::RepaHead& head,
                  RepaLoss type);

}  // namespace sfd
