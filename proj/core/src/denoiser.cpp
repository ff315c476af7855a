#include "sfd/denoiser.hpp"

#include <cmath>

#include "sfd/error.hpp"

namespace sfd {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Tensor init_weight(std::size_t in, std::size_t out, Rng& rng) {
  std::vector<double> w(in * out);
  const double sigma = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& x : w) x = sigma * rng.normal();
  return Tensor::param({in, out}, std::move(w));
}

Tensor zero_param(Shape shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return Tensor::param(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_rows(matmul(x, w), b);
}

void check_times(std::span<const double> t, const char* which) {
  for (double x : t)
    if (!(x >= 0.0 && x <= 1.0))
      throw contract_error(std::string(which) + " time " + std::to_string(x) + " outside [0,1]");
}

}  // namespace

Tensor sinusoidal_features(std::span<const double> t, std::size_t n_pairs) {
  if (n_pairs == 0) throw contract_error("sinusoidal_features: need at least one pair");
  const std::size_t b = t.size(), f = 2 * n_pairs;
  std::vector<double> out(b * f);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    // Period 10^(4i/(n-1)) on the millitime scale -> angular frequency.
    const double expo = n_pairs > 1 ? -4.0 * static_cast<double>(i) /
                                          static_cast<double>(n_pairs - 1)
                                    : 0.0;
    const double w = kTwoPi * 1000.0 * std::pow(10.0, expo);
    for (std::size_t r = 0; r < b; ++r) {
      out[r * f + i] = std::sin(w * t[r]);
      out[r * f + n_pairs + i] = std::cos(w * t[r]);
    }
  }
  return Tensor::from({b, f}, std::move(out));
}

RepaLoss parse_repa_loss(const std::string& name) {
  if (name == "cosine") return RepaLoss::cosine;
  if (name == "mse") return RepaLoss::mse;
  if (name == "cosine+mse") return RepaLoss::cosine_mse;
  throw contract_error("unknown alignment loss type: " + name);
}

Denoiser::Denoiser(const DenoiserConfig& cfg, Rng& init_rng) : cfg_(cfg) {
  if (cfg.hidden % 2 != 0) throw contract_error("Denoiser: hidden width must be even");
  if (cfg.repa_depth < 1 || cfg.repa_depth > cfg.blocks)
    throw contract_error("Denoiser: repa_depth must be in [1, blocks]");
  const std::size_t h = cfg.hidden, half = h / 2, feat = 2 * cfg.time_freqs;
  in_proj_ = {init_weight(cfg.sem_dim + cfg.tex_dim, h, init_rng), zero_param({h})};
  tau_sem_ = {{init_weight(feat, half, init_rng), zero_param({half})},
              {init_weight(half, half, init_rng), zero_param({half})}};
  tau_tex_ = {{init_weight(feat, half, init_rng), zero_param({half})},
              {init_weight(half, half, init_rng), zero_param({half})}};
  class_table_ = init_weight(cfg.num_classes + 1, h, init_rng);
  for (std::size_t i = 0; i < cfg.blocks; ++i)
    blocks_.push_back({{init_weight(h, h, init_rng), zero_param({h})},
                       {init_weight(h, h, init_rng), zero_param({h})},
                       {init_weight(h, h, init_rng), zero_param({h})},
                       {init_weight(h, h, init_rng), zero_param({h})}});
  head_sem_ = {zero_param({h, cfg.sem_dim}), zero_param({cfg.sem_dim})};
  head_tex_ = {zero_param({h, cfg.tex_dim}), zero_param({cfg.tex_dim})};
  repa_head_ = {init_weight(h, cfg.feature_dim, init_rng), zero_param({cfg.feature_dim})};
}

Tensor Denoiser::embed_one(const TimeEmbedder& emb, std::span<const double> t) const {
  Tensor f = sinusoidal_features(t, cfg_.time_freqs);
  return linear(silu(linear(f, emb.l1.w, emb.l1.b)), emb.l2.w, emb.l2.b);
}

Tensor Denoiser::time_embedding(std::span<const double> t_sem,
                                std::span<const double> t_tex) const {
  if (t_sem.size() != t_tex.size())
    throw shape_error("time_embedding: time vectors must have equal length");
  check_times(t_sem, "semantic");
  check_times(t_tex, "texture");
  return concat_cols(embed_one(tau_sem_, t_sem), embed_one(tau_tex_, t_tex));
}

Denoiser::Output Denoiser::forward(const CompositeLatent& c, std::span<const double> t_sem,
                                   std::span<const double> t_tex,
                                   std::span<const int> labels) const {
  if (c.sem.rank() != 2 || c.tex.rank() != 2 || c.sem.cols() != cfg_.sem_dim ||
      c.tex.cols() != cfg_.tex_dim || c.sem.rows() != c.tex.rows())
    throw shape_error("Denoiser::forward: composite latent has wrong shape");
  const std::size_t b = c.sem.rows();
  if (t_sem.size() != b || t_tex.size() != b || labels.size() != b)
    throw shape_error("Denoiser::forward: batch size mismatch between latent, times, labels");
  for (int y : labels)
    if (y < 0 || y > static_cast<int>(cfg_.num_classes))
      throw contract_error("Denoiser::forward: label " + std::to_string(y) +
                           " outside [0, " + std::to_string(cfg_.num_classes) + "]");

  Tensor e = time_embedding(t_sem, t_tex);
  Tensor cond = silu(e + gather_rows(class_table_, labels));
  Tensor h = linear(make_composite(c), in_proj_.w, in_proj_.b);

  Tensor tap;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& blk = blocks_[i];
    Tensor scale = linear(cond, blk.mod_scale.w, blk.mod_scale.b);
    Tensor shift = linear(cond, blk.mod_shift.w, blk.mod_shift.b);
    Tensor u = layer_norm(h) * (scale + 1.0) + shift;
    h = h + linear(silu(linear(u, blk.l1.w, blk.l1.b)), blk.l2.w, blk.l2.b);
    if (i + 1 == cfg_.repa_depth) tap = h;
  }
  Tensor out = layer_norm(h);
  return {linear(out, head_sem_.w, head_sem_.b), linear(out, head_tex_.w, head_tex_.b), tap};
}

Denoiser::Output Denoiser::forward(const CompositeLatent& c, double t_sem, double t_tex,
                                   int label) const {
  const std::size_t b = c.sem.rows();
  std::vector<double> ts(b, t_sem), tz(b, t_tex);
  std::vector<int> ys(b, label);
  return forward(c, ts, tz, ys);
}

std::vector<std::pair<std::string, Tensor>> Denoiser::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto put = [&out](const std::string& name, const Linear& l) {
    out.emplace_back(name + ".w", l.w);
    out.emplace_back(name + ".b", l.b);
  };
  put("in_proj", in_proj_);
  put("tau_sem.l1", tau_sem_.l1);
  put("tau_sem.l2", tau_sem_.l2);
  put("tau_tex.l1", tau_tex_.l1);
  put("tau_tex.l2", tau_tex_.l2);
  out.emplace_back("class_table", class_table_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = "block" + std::to_string(i);
    put(p + ".mod_scale", blocks_[i].mod_scale);
    put(p + ".mod_shift", blocks_[i].mod_shift);
    put(p + ".l1", blocks_[i].l1);
    put(p + ".l2", blocks_[i].l2);
  }
  put("head_sem", head_sem_);
  put("head_tex", head_tex_);
  out.emplace_back("repa_head.w", repa_head_.w);
  out.emplace_back("repa_head.b", repa_head_.b);
  return out;
}

std::vector<Tensor> Denoiser::params() const {
  std::vector<Tensor> out;
  for (auto& [name, p] : named_params()) out.push_back(p);
  return out;
}

void Denoiser::load_params(const std::vector<std::pair<std::string, Tensor>>& src) {
  auto dst = named_params();
  if (src.size() != dst.size())
    throw contract_error("Denoiser::load_params: parameter count mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (src[i].first != dst[i].first || src[i].second.shape() != dst[i].second.shape())
      throw contract_error("Denoiser::load_params: mismatch at " + dst[i].first);
    Tensor t = dst[i].second;
    std::copy(src[i].second.values().begin(), src[i].second.values().end(), t.raw().begin());
  }
}

void Denoiser::freeze() {
  for (auto& [name, p] : named_params()) {
    Tensor t = p;
    t.set_requires_grad(false);
  }
}

Tensor repa_align(const Tensor& h_tap, const Tensor& y_star, const Denoiser::RepaHead& head,
                  RepaLoss type) {
  if (h_tap.rank() != 2 || y_star.rank() != 2 || h_tap.rows() != y_star.rows())
    throw shape_error("repa_align: tap and target must be rank-2 with equal rows");
  Tensor proj = add_rows(matmul(h_tap, head.w), head.b);
  if (proj.cols() != y_star.cols())
    throw shape_error("repa_align: projected width does not match target width");

  Tensor loss;
  if (type == RepaLoss::cosine || type == RepaLoss::cosine_mse) {
    Tensor dot = row_sum(proj * y_star);
    Tensor n1 = sqrt_(add_scalar(row_sum(square(proj)), 1e-16));
    Tensor n2 = sqrt_(add_scalar(row_sum(square(y_star)), 1e-16));
    loss = mean_all(1.0 - dot / (n1 * n2));
  }
  if (type == RepaLoss::mse || type == RepaLoss::cosine_mse) {
    Tensor m = mean_all(row_sum(square(proj - y_star)));
    loss = loss.defined() ? loss + m : m;
  }
  return loss;
}

}  // namespace sfd
