#include "sfd/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sfd/flow.hpp"

namespace sfd {

TimeSampler parse_time_sampler(const std::string& name) {
  if (name == "logit_normal") return TimeSampler::logit_normal;
  if (name == "uniform") return TimeSampler::uniform;
  throw contract_error("unknown time sampler '" + name + "'");
}

void check_train_config(const TrainConfig& cfg) {
  if (cfg.delta_t < 0.0 || cfg.delta_t > 1.0)
    throw contract_error("train: delta_t must lie in [0,1]");
  if (cfg.beta < 0.0)
    throw contract_error("train: beta must be non-negative");
  if (cfg.lambda_repa < 0.0)
    throw contract_error("train: lambda_repa must be non-negative");
  if (cfg.label_drop < 0.0 || cfg.label_drop > 1.0)
    throw contract_error("train: label_drop must lie in [0,1]");
  if (cfg.batch == 0)
    throw contract_error("train: batch must be positive");
  if (cfg.logit_scale <= 0.0)
    throw contract_error("train: logit_scale must be positive");
}

// ---- compressors --------------------------------------------------------------

SemVaeCompressor::SemVaeCompressor(SemVae vae) : vae_(std::move(vae)) {}

std::size_t SemVaeCompressor::in_dim() const { return vae_.config().in_dim; }
std::size_t SemVaeCompressor::latent_dim() const { return vae_.config().latent_dim; }

Tensor SemVaeCompressor::encode_latent(const Tensor& features, Rng& rng) const {
  return reparameterize(vae_.encode(features), rng).detach();
}

Tensor SemVaeCompressor::decode_features(const Tensor& latent) const {
  return vae_.decode(latent).detach();
}

void SemVaeCompressor::save_into(Archive& a) const {
  const SemVaeConfig& c = vae_.config();
  a.put_text("kind", "semvae");
  a.put_u64("cfg.in_dim", c.in_dim);
  a.put_u64("cfg.latent_dim", c.latent_dim);
  a.put_u64("cfg.hidden", c.hidden);
  a.put_u64("cfg.blocks", c.blocks);
  a.put_scalar("cfg.logvar_min", c.logvar_min);
  a.put_scalar("cfg.logvar_max", c.logvar_max);
  for (const auto& [name, t] : vae_.named_params())
    a.put_tensor("param." + name, t);
}

PcaCompressor::PcaCompressor(Pca pca) : pca_(std::move(pca)) {}

std::size_t PcaCompressor::in_dim() const { return pca_.mean.numel(); }
std::size_t PcaCompressor::latent_dim() const { return pca_.components.cols(); }

Tensor PcaCompressor::encode_latent(const Tensor& features, Rng&) const {
  return pca_.project(features).detach();
}

Tensor PcaCompressor::decode_features(const Tensor& latent) const {
  return pca_.reconstruct(latent).detach();
}

void PcaCompressor::save_into(Archive& a) const {
  a.put_text("kind", "pca");
  a.put_tensor("mean", pca_.mean);
  a.put_tensor("components", pca_.components);
  a.put_tensor("spectrum", pca_.spectrum);
  a.put_scalar("rank_deficient", pca_.rank_deficient ? 1.0 : 0.0);
}

void save_compressor(const SemanticCompressor& c, const std::string& path) {
  Archive a;
  a.put_u64("format.version", kCheckpointVersion);
  c.save_into(a);
  a.save(path);
}

std::unique_ptr<SemanticCompressor> load_compressor(const std::string& path) {
  const Archive a = Archive::load(path);
  if (a.get_u64("format.version") != kCheckpointVersion)
    throw format_error("compressor checkpoint: unsupported version");
  const std::string kind = a.get_text("kind");
  if (kind == "semvae") {
    SemVaeConfig cfg;
    cfg.in_dim = static_cast<std::size_t>(a.get_u64("cfg.in_dim"));
    cfg.latent_dim = static_cast<std::size_t>(a.get_u64("cfg.latent_dim"));
    cfg.hidden = static_cast<std::size_t>(a.get_u64("cfg.hidden"));
    cfg.blocks = static_cast<std::size_t>(a.get_u64("cfg.blocks"));
    cfg.logvar_min = a.get_scalar("cfg.logvar_min");
    cfg.logvar_max = a.get_scalar("cfg.logvar_max");
    Rng scratch(0);
    SemVae vae(cfg, scratch);
    std::vector<std::pair<std::string, Tensor>> params;
    for (const auto& [name, t] : vae.named_params())
      params.emplace_back(name, a.get_tensor("param." + name));
    vae.load_params(params);
    vae.freeze();
    return std::make_unique<SemVaeCompressor>(std::move(vae));
  }
  if (kind == "pca") {
    Pca pca;
    pca.mean = a.get_tensor("mean");
    pca.components = a.get_tensor("components");
    pca.spectrum = a.get_tensor("spectrum");
    pca.rank_deficient = a.get_scalar("rank_deficient") != 0.0;
    return std::make_unique<PcaCompressor>(std::move(pca));
  }
  throw format_error("compressor checkpoint: unknown kind '" + kind + "'");
}

// ---- batch construction --------------------------------------------------------

SfdBatch prepare_sfd_batch(const Tensor& x1, const std::vector<int>& labels,
                           const FoundationEncoder& foundation,
                           const SemanticCompressor& compressor, const TrainConfig& cfg,
                           const Rng& iter_rng) {
  check_train_config(cfg);
  const std::size_t b = x1.rows();
  const std::size_t c_z = x1.cols();
  const std::size_t c_s = compressor.latent_dim();
  if (labels.size() != b)
    throw contract_error("prepare_sfd_batch: label count mismatch");
  if (foundation.in_dim() != c_z)
    throw contract_error("prepare_sfd_batch: foundation input width mismatch");
  if (compressor.in_dim() != foundation.out_dim())
    throw contract_error("prepare_sfd_batch: compressor input width mismatch");

  const Tensor y_star = foundation.features(x1);  // (B, C_in), constant

  SfdBatch batch;
  batch.t_sem.resize(b);
  batch.t_tex.resize(b);
  batch.labels.resize(b);
  std::vector<double> noisy_s(b * c_s), noisy_z(b * c_z);
  std::vector<double> tgt_s(b * c_s), tgt_z(b * c_z);

  // Per-row substream: all randomness for row i comes from derive(i) on the
  // iteration stream, so the batch is identical under any evaluation order.
  // Draw order per row: raw time, label dropout, s1 (encoder draws), s0, z0.
  for (std::size_t i = 0; i < b; ++i) {
    Rng row = iter_rng.derive(i);

    double u = 0.0;
    if (cfg.time_sampler == TimeSampler::logit_normal)
      u = (1.0 + cfg.delta_t) * sample_time_logit_normal(row, cfg.logit_loc, cfg.logit_scale);
    else
      u = (1.0 + cfg.delta_t) * row.uniform();
    const DualTime t = times_from_raw(u, cfg.delta_t);
    batch.t_sem[i] = t.t_sem;
    batch.t_tex[i] = t.t_tex;

    // Dropped rows carry -1 here; the forward path resolves it to the
    // model's null row, keeping batch construction model-independent.
    const bool drop = row.uniform() < cfg.label_drop;
    batch.labels[i] = drop ? -1 : labels[i];

    // s1 from the frozen compressor on this row's features.
    std::vector<double> feat_row(foundation.out_dim());
    for (std::size_t j = 0; j < feat_row.size(); ++j)
      feat_row[j] = y_star.values()[i * feat_row.size() + j];
    const Tensor s1 =
        compressor.encode_latent(Tensor::from({1, feat_row.size()}, feat_row), row);

    for (std::size_t j = 0; j < c_s; ++j) {
      const double s0 = row.normal();
      const double s1j = s1.values()[j];
      noisy_s[i * c_s + j] = t.t_sem * s1j + (1.0 - t.t_sem) * s0;
      tgt_s[i * c_s + j] = s1j - s0;
    }
    for (std::size_t j = 0; j < c_z; ++j) {
      const double z0 = row.normal();
      const double z1j = x1.values()[i * c_z + j];
      noisy_z[i * c_z + j] = t.t_tex * z1j + (1.0 - t.t_tex) * z0;
      tgt_z[i * c_z + j] = z1j - z0;
    }
  }

  batch.noisy.sem = Tensor::from({b, c_s}, noisy_s);
  batch.noisy.tex = Tensor::from({b, c_z}, noisy_z);
  batch.target_sem = Tensor::from({b, c_s}, tgt_s);
  batch.target_tex = Tensor::from({b, c_z}, tgt_z);
  batch.y_star = y_star;
  return batch;
}

SfdLoss sfd_loss_from_output(const Denoiser::Output& out, const SfdBatch& batch,
                             const Denoiser::RepaHead& head, const TrainConfig& cfg) {
  SfdLoss loss;
  loss.loss_z = velocity_loss(out.v_tex, batch.target_tex);
  loss.loss_s = velocity_loss(out.v_sem, batch.target_sem);
  loss.loss_repa = repa_align(out.tap, batch.y_star, head, cfg.repa_loss);
  // Exactly loss_z + beta*loss_s + lambda*loss_repa, in this association:
  // the decomposition identity is checked against the same expression.
  loss.total = add(add(loss.loss_z, mul_scalar(loss.loss_s, cfg.beta)),
                   mul_scalar(loss.loss_repa, cfg.lambda_repa));
  return loss;
}

namespace {

// Resolve −1 placeholders from label dropout to the model's null row.
void resolve_null_labels(std::vector<int>& labels, int null_label) {
  for (int& l : labels)
    if (l < 0) l = null_label;
}

SfdLoss forward_loss(const Denoiser& model, SfdBatch& batch, const TrainConfig& cfg) {
  resolve_null_labels(batch.labels, model.null_label());
  const Denoiser::Output out =
      model.forward(batch.noisy, batch.t_sem, batch.t_tex, batch.labels);
  SfdLoss loss = sfd_loss_from_output(out, batch, model.repa_head(), cfg);
  if (!std::isfinite(loss.total.item()))
    throw divergence_error("sfd loss is non-finite");
  return loss;
}

SfdLossValues values_of(const SfdLoss& loss) {
  return {loss.total.item(), loss.loss_z.item(), loss.loss_s.item(),
          loss.loss_repa.item()};
}

}  // namespace

SfdLoss sfd_loss(const Tensor& x1, const std::vector<int>& labels, const Denoiser& model,
                 const FoundationEncoder& foundation, const SemanticCompressor& compressor,
                 const TrainConfig& cfg, std::size_t iteration) {
  const Rng iter_rng = Rng(cfg.seed).derive(iteration + 1);
  SfdBatch batch = prepare_sfd_batch(x1, labels, foundation, compressor, cfg, iter_rng);
  return forward_loss(model, batch, cfg);
}

// ---- checkpointing --------------------------------------------------------------

void save_sfd_checkpoint(const std::string& path, const Denoiser& model, const AdamW& opt,
                         std::size_t iteration, const TrainConfig& cfg,
                         const std::string& config_echo) {
  Archive a;
  a.put_u64("format.version", kCheckpointVersion);
  a.put_u64("meta.iteration", iteration);
  a.put_u64("meta.seed", cfg.seed);
  a.put_scalar("meta.delta_t", cfg.delta_t);
  a.put_u64("rng.seed", cfg.seed);
  a.put_u64("rng.counter", 0);  // the master stream is never consumed directly
  a.put_text("config.echo", config_echo);
  a.put_u64("opt.step", opt.step_count());
  const auto named = model.named_params();
  if (named.size() != opt.size())
    throw contract_error("save_sfd_checkpoint: optimizer/parameter count mismatch");
  for (std::size_t i = 0; i < named.size(); ++i) {
    a.put_tensor("param." + named[i].first, named[i].second);
    a.put("opt.m." + named[i].first, named[i].second.shape(),
          std::vector<double>(opt.m(i).begin(), opt.m(i).end()));
    a.put("opt.v." + named[i].first, named[i].second.shape(),
          std::vector<double>(opt.v(i).begin(), opt.v(i).end()));
  }
  a.save(path);
}

SfdCheckpointInfo load_sfd_checkpoint(const std::string& path, Denoiser& model, AdamW& opt) {
  const Archive a = Archive::load(path);
  if (a.get_u64("format.version") != kCheckpointVersion)
    throw format_error("checkpoint: unsupported version");

  SfdCheckpointInfo info;
  info.iteration = static_cast<std::size_t>(a.get_u64("meta.iteration"));
  info.seed = a.get_u64("meta.seed");
  info.delta_t = a.get_scalar("meta.delta_t");
  info.config_echo = a.get_text("config.echo");

  std::vector<std::pair<std::string, Tensor>> params;
  std::vector<std::vector<double>> m, v;
  for (const auto& [name, t] : model.named_params()) {
    (void)t;
    params.emplace_back(name, a.get_tensor("param." + name));
    m.push_back(a.get("opt.m." + name).data);
    v.push_back(a.get("opt.v." + name).data);
  }
  model.load_params(params);
  opt.restore(a.get_u64("opt.step"), std::move(m), std::move(v));
  return info;
}

SfdCheckpointInfo peek_sfd_checkpoint(const std::string& path) {
  const Archive a = Archive::load(path);
  if (a.get_u64("format.version") != kCheckpointVersion)
    throw format_error("checkpoint: unsupported version");
  SfdCheckpointInfo info;
  info.iteration = static_cast<std::size_t>(a.get_u64("meta.iteration"));
  info.seed = a.get_u64("meta.seed");
  info.delta_t = a.get_scalar("meta.delta_t");
  info.config_echo = a.get_text("config.echo");
  return info;
}

// ---- the loop --------------------------------------------------------------------

TrainSfdResult train_sfd(const TrainConfig& cfg, Denoiser& model, AdamW& opt,
                         const FoundationEncoder& foundation,
                         const SemanticCompressor& compressor, const Tensor& train_x,
                         const std::vector<int>& train_y, std::size_t start_iter,
                         const std::string& log_path, const std::string& checkpoint_path,
                         const std::string& config_echo) {
  check_train_config(cfg);
  const std::size_t n = train_x.rows();
  if (n == 0)
    throw contract_error("train_sfd: empty training set");
  if (train_y.size() != n)
    throw contract_error("train_sfd: label count mismatch");
  if (start_iter > cfg.iters)
    throw contract_error("train_sfd: start iteration beyond budget");

  std::ofstream log_file;
  if (!log_path.empty()) {
    log_file.open(log_path, start_iter == 0 ? std::ios::trunc : std::ios::app);
    if (!log_file)
      throw format_error("train_sfd: cannot open log '" + log_path + "'");
    if (start_iter == 0)
      log_file << "iteration,total,loss_z,loss_s,loss_repa,wall_ms\n";
  }

  const Rng master(cfg.seed);
  TrainSfdResult result;
  auto tick = std::chrono::steady_clock::now();
  char buf[64];

  for (std::size_t iter = start_iter; iter < cfg.iters; ++iter) {
    const Rng iter_rng = master.derive(iter + 1);

    // Row selection consumes a private copy; per-sample streams derive from
    // the untouched iteration stream.
    Rng pick = iter_rng;
    std::vector<double> rows(cfg.batch * train_x.cols());
    std::vector<int> labels(cfg.batch);
    for (std::size_t i = 0; i < cfg.batch; ++i) {
      const std::size_t r = static_cast<std::size_t>(pick.next_u64() % n);
      labels[i] = train_y[r];
      for (std::size_t j = 0; j < train_x.cols(); ++j)
        rows[i * train_x.cols() + j] = train_x.values()[r * train_x.cols() + j];
    }
    const Tensor x1 = Tensor::from({cfg.batch, train_x.cols()}, rows);

    SfdBatch batch = prepare_sfd_batch(x1, labels, foundation, compressor, cfg, iter_rng);
    SfdLoss loss = forward_loss(model, batch, cfg);

    opt.zero_grad();
    backward(loss.total);
    opt.step();

    result.final_loss = values_of(loss);

    const std::size_t done = iter + 1;
    if (!log_path.empty() &&
        (done % cfg.log_every == 0 || done == cfg.iters)) {
      const auto now = std::chrono::steady_clock::now();
      const double wall_ms =
          std::chrono::duration<double, std::milli>(now - tick).count();
      tick = now;
      TrainLogRow row{done, result.final_loss, wall_ms};
      result.log.push_back(row);
      log_file << done;
      for (double v : {row.loss.total, row.loss.loss_z, row.loss.loss_s, row.loss.loss_repa}) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        log_file << "," << buf;
      }
      std::snprintf(buf, sizeof(buf), "%.3f", wall_ms);
      log_file << "," << buf << "\n";
      log_file.flush();
    } else if (log_path.empty() && (done % cfg.log_every == 0 || done == cfg.iters)) {
      result.log.push_back(TrainLogRow{done, result.final_loss, 0.0});
    }

    if (!checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
        (done % cfg.checkpoint_every == 0 || done == cfg.iters)) {
      save_sfd_checkpoint(checkpoint_path, model, opt, done, cfg, config_echo);
    }
  }

  return result;
}

}  // namespace sfd
