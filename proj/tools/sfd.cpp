// Command-line front end: dataset generation, the two training stages,
// sampling, evaluation, and the delta-t sweep.  Exit codes: 0 success,
// 1 internal failure, 2 missing dependency artifact, 3 configuration error,
// 4 divergence.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfd/checkpoint.hpp"
#include "sfd/config.hpp"
#include "sfd/dataset.hpp"
#include "sfd/eval.hpp"
#include "sfd/train.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t jobs = 1;

  // sample-only flags
  std::string label = "";
  std::optional<std::size_t> steps;
  std::string method;
  std::optional<double> guidance;
  std::optional<double> delta_t;
};

// Precedence: flags > file > defaults.
sfd::Config resolve_config(const GlobalArgs& g) {
  sfd::Config cfg;
  if (!g.config_path.empty()) cfg = sfd::Config::load_file(g.config_path);
  if (g.seed) {
    cfg.set_u64("data.seed", *g.seed);
    cfg.set_u64("semvae.seed", *g.seed);
    cfg.set_u64("train.seed", *g.seed);
    cfg.set_u64("sample.seed", *g.seed);
  }
  if (g.steps) cfg.set_u64("sample.steps", *g.steps);
  if (!g.method.empty()) cfg.set_text("sample.method", g.method);
  if (g.guidance) cfg.set_real("sample.guidance_scale", *g.guidance);
  if (g.delta_t) cfg.set_real("sample.delta_t", *g.delta_t);
  return cfg;
}

std::string out_or(const GlobalArgs& g, const sfd::Config& cfg, const char* key) {
  return g.out.empty() ? cfg.get_text(key) : g.out;
}

void require_artifact(const std::string& path, const std::string& what) {
  if (!std::filesystem::exists(path))
    throw sfd::dependency_error(what + " not found at '" + path +
                                "' (generate it first)");
}

// ---- config -> module structs ---------------------------------------------------

sfd::ToyDataConfig data_config(const sfd::Config& c) {
  sfd::ToyDataConfig dc;
  dc.dim = c.get_u64("data.dim");
  dc.classes = c.get_u64("data.classes");
  dc.n_train = c.get_u64("data.n_train");
  dc.n_test = c.get_u64("data.n_test");
  dc.radius = c.get_real("data.radius");
  dc.sigma_tangent = c.get_real("data.sigma_tangent");
  dc.sigma_radial = c.get_real("data.sigma_radial");
  dc.ripple_amp = c.get_real("data.ripple_amp");
  dc.ripple_freq = c.get_real("data.ripple_freq");
  dc.seed = c.get_u64("data.seed");
  return dc;
}

sfd::FoundationEncoder foundation_from(const sfd::Config& c) {
  return sfd::FoundationEncoder(c.get_u64("data.dim"), c.get_u64("features.dim"),
                                c.get_u64("features.seed"));
}

sfd::TrainConfig train_config(const sfd::Config& c) {
  sfd::TrainConfig tc;
  tc.delta_t = c.get_real("train.delta_t");
  tc.beta = c.get_real("train.beta");
  tc.lambda_repa = c.get_real("train.lambda_repa");
  tc.lambda_kl = c.get_real("semvae.kl_weight");
  tc.lr = c.get_real("train.lr");
  tc.weight_decay = c.get_real("train.weight_decay");
  tc.batch = c.get_u64("train.batch");
  tc.iters = c.get_u64("train.iterations");
  tc.time_sampler = sfd::parse_time_sampler(c.get_text("train.time_sampler"));
  tc.logit_loc = c.get_real("train.logit_loc");
  tc.logit_scale = c.get_real("train.logit_scale");
  tc.repa_loss = sfd::parse_repa_loss(c.get_text("model.repa_loss"));
  tc.label_drop = c.get_real("train.label_drop");
  tc.log_every = c.get_u64("train.log_every");
  tc.checkpoint_every = c.get_u64("train.checkpoint_every");
  tc.seed = c.get_u64("train.seed");
  return tc;
}

sfd::DenoiserConfig model_config(const sfd::Config& c, std::size_t sem_dim) {
  sfd::DenoiserConfig mc;
  mc.sem_dim = sem_dim;
  mc.tex_dim = c.get_u64("data.dim");
  mc.feature_dim = c.get_u64("features.dim");
  mc.hidden = c.get_u64("model.hidden");
  mc.blocks = c.get_u64("model.blocks");
  mc.num_classes = c.get_u64("data.classes");
  mc.time_freqs = c.get_u64("model.time_freqs");
  mc.repa_depth = c.get_u64("model.repa_depth");
  return mc;
}

sfd::SamplerConfig sampler_config(const sfd::Config& c) {
  sfd::SamplerConfig sc;
  const std::string method = c.get_text("sample.method");
  if (method == "euler")
    sc.method = sfd::SamplerConfig::Method::euler;
  else if (method == "adaptive")
    sc.method = sfd::SamplerConfig::Method::adaptive;
  else
    throw sfd::config_error("sample.method must be euler or adaptive, got '" + method + "'");
  sc.steps = c.get_u64("sample.steps");
  sc.delta_t = c.get_real("sample.delta_t");
  sc.atol = c.get_real("sample.atol");
  sc.rtol = c.get_real("sample.rtol");
  sc.guidance_scale = c.get_real("sample.guidance_scale");
  return sc;
}

std::vector<double> parse_real_list(const std::string& text, const char* key) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0')
      throw sfd::config_error(std::string(key) + ": bad list item '" + item + "'");
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& text, const char* key) {
  std::vector<std::uint64_t> out;
  for (double v : parse_real_list(text, key)) {
    if (v < 0.0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
      throw sfd::config_error(std::string(key) + ": expected unsigned integers");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

// ---- artifact loading -------------------------------------------------------------

sfd::ToyDataset load_required_dataset(const GlobalArgs& g, const sfd::Config& cfg) {
  const std::string path = cfg.get_text("io.dataset");
  require_artifact(path, "dataset");
  (void)g;
  return sfd::load_dataset(path, cfg.get_u64("data.n_train"));
}

std::unique_ptr<sfd::SemanticCompressor> load_required_compressor(const sfd::Config& cfg) {
  const std::string path = cfg.get_text("io.semvae");
  require_artifact(path, "compressor checkpoint");
  return sfd::load_compressor(path);
}

// Reconstructs the denoiser and optimizer from a checkpoint using its own
// config echo, so sampling needs no external configuration.
struct LoadedModel {
  sfd::Config cfg;
  sfd::Denoiser model;
  sfd::SfdCheckpointInfo info;
};

LoadedModel load_model(const std::string& path) {
  require_artifact(path, "denoiser checkpoint");
  const sfd::SfdCheckpointInfo peek = sfd::peek_sfd_checkpoint(path);
  sfd::Config echo = sfd::Config::parse(peek.config_echo);
  sfd::Rng scratch(0);
  sfd::Denoiser model(model_config(echo, echo.get_u64("semvae.latent")), scratch);
  sfd::AdamW opt(model.params(), 1e-3);
  const sfd::SfdCheckpointInfo info = sfd::load_sfd_checkpoint(path, model, opt);
  return {std::move(echo), std::move(model), info};
}

// ---- commands -----------------------------------------------------------------------

int cmd_gen_data(const GlobalArgs& g) {
  const sfd::Config cfg = resolve_config(g);
  const sfd::ToyDataset ds = sfd::generate_toy(data_config(cfg));
  const std::string path = out_or(g, cfg, "io.dataset");
  sfd::save_dataset(ds, path);
  std::printf("wrote %s (%zu train + %zu test rows, D=%zu, K=%zu)\n", path.c_str(),
              ds.train_x.rows(), ds.test_x.rows(), ds.dim, ds.classes);
  return 0;
}

int cmd_train_semvae(const GlobalArgs& g) {
  const sfd::Config cfg = resolve_config(g);
  const sfd::ToyDataset ds = load_required_dataset(g, cfg);
  const sfd::FoundationEncoder foundation = foundation_from(cfg);
  const sfd::Tensor features = foundation.features(ds.train_x);
  const std::string path = out_or(g, cfg, "io.semvae");
  const std::string kind = cfg.get_text("semvae.compressor");

  if (kind == "semvae") {
    sfd::SemVaeConfig vc;
    vc.in_dim = cfg.get_u64("features.dim");
    vc.latent_dim = cfg.get_u64("semvae.latent");
    vc.hidden = cfg.get_u64("semvae.hidden");
    vc.blocks = cfg.get_u64("semvae.blocks");
    sfd::SemVaeTrainConfig tc;
    tc.batch = cfg.get_u64("semvae.batch");
    tc.iters = cfg.get_u64("semvae.iterations");
    tc.lr = cfg.get_real("semvae.lr");
    tc.weight_decay = cfg.get_real("semvae.weight_decay");
    tc.lambda_kl = cfg.get_real("semvae.kl_weight");
    tc.jitter = cfg.get_real("semvae.jitter");
    tc.seed = cfg.get_u64("semvae.seed");
    sfd::SemVae vae = sfd::train_semvae(features, vc, tc);
    sfd::save_compressor(sfd::SemVaeCompressor(std::move(vae)), path);
  } else if (kind == "pca") {
    sfd::Pca pca = sfd::fit_pca(features, cfg.get_u64("semvae.latent"));
    sfd::save_compressor(sfd::PcaCompressor(std::move(pca)), path);
  } else {
    throw sfd::config_error("semvae.compressor must be semvae or pca, got '" + kind + "'");
  }
  std::printf("wrote %s (%s, C_s=%llu)\n", path.c_str(), kind.c_str(),
              static_cast<unsigned long long>(cfg.get_u64("semvae.latent")));
  return 0;
}

int cmd_train_sfd(const GlobalArgs& g) {
  const sfd::Config cfg = resolve_config(g);
  const sfd::ToyDataset ds = load_required_dataset(g, cfg);
  const auto compressor = load_required_compressor(cfg);
  const sfd::FoundationEncoder foundation = foundation_from(cfg);

  const sfd::TrainConfig tc = train_config(cfg);
  sfd::Rng init = sfd::Rng(tc.seed).derive(0x5FD0);
  sfd::Denoiser model(model_config(cfg, compressor->latent_dim()), init);
  sfd::AdamW opt(model.params(), tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay);

  const std::string ckpt = out_or(g, cfg, "io.checkpoint");
  const sfd::TrainSfdResult res =
      sfd::train_sfd(tc, model, opt, foundation, *compressor, ds.train_x, ds.train_y, 0,
                     cfg.get_text("io.log"), ckpt, cfg.serialize());
  std::printf("wrote %s (%zu iterations, final total %.6g)\n", ckpt.c_str(), tc.iters,
              res.final_loss.total);
  return 0;
}

int cmd_sample(const GlobalArgs& g) {
  const sfd::Config cfg = resolve_config(g);
  LoadedModel loaded = load_model(cfg.get_text("io.checkpoint"));
  const sfd::SamplerConfig sc = sampler_config(cfg);
  const std::size_t per_class = cfg.get_u64("sample.n_per_class");
  const std::uint64_t seed = cfg.get_u64("sample.seed");

  sfd::GeneratedSamples out;
  if (g.label.empty()) {
    out = sfd::class_balanced_generate(loaded.model, sc, per_class, seed);
  } else if (g.label == "null") {
    out = sfd::generate_labeled(loaded.model, sc, loaded.model.null_label(), per_class, seed);
  } else {
    char* end = nullptr;
    const long label = std::strtol(g.label.c_str(), &end, 10);
    if (end == g.label.c_str() || *end != '\0' || label < 0 ||
        label >= static_cast<long>(loaded.model.config().num_classes))
      throw sfd::config_error("--label must be a class index or 'null', got '" + g.label +
                              "'");
    out = sfd::generate_labeled(loaded.model, sc, static_cast<int>(label), per_class, seed);
  }

  const std::string path = out_or(g, cfg, "io.samples");
  sfd::save_samples(out, path);
  std::printf("wrote %s (%zu samples)\n", path.c_str(), out.tex.rows());
  return 0;
}

int cmd_eval(const GlobalArgs& g) {
  const sfd::Config cfg = resolve_config(g);
  const sfd::ToyDataset ds = load_required_dataset(g, cfg);
  const std::string sample_path = cfg.get_text("io.samples");
  require_artifact(sample_path, "sample file");
  const sfd::GeneratedSamples gen = sfd::load_samples(sample_path);

  const auto reports = sfd::evaluate_samples(gen.tex, ds.test_x, cfg.get_u64("eval.max_n"),
                                             cfg.get_u64("sample.seed"));
  const std::string path = out_or(g, cfg, "io.metrics");
  sfd::write_metrics_csv(reports, path);
  for (const auto& r : reports)
    std::printf("%-18s %.6g  (n=%zu vs %zu)\n", r.name.c_str(), r.value, r.n_a, r.n_b);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_sweep(const GlobalArgs& g) {
  const sfd::Config cfg = resolve_config(g);
  const sfd::ToyDataset ds = load_required_dataset(g, cfg);
  const auto compressor = load_required_compressor(cfg);
  const sfd::FoundationEncoder foundation = foundation_from(cfg);

  sfd::SweepSpec spec;
  spec.deltas = parse_real_list(cfg.get_text("sweep.deltas"), "sweep.deltas");
  spec.seeds = parse_u64_list(cfg.get_text("sweep.seeds"), "sweep.seeds");
  spec.train = train_config(cfg);
  spec.model = model_config(cfg, compressor->latent_dim());
  spec.sample = sampler_config(cfg);
  spec.per_class = cfg.get_u64("sample.n_per_class");
  spec.jobs = g.jobs;
  const std::string protocol = cfg.get_text("sweep.label");
  if (protocol != "balanced" && protocol != "null")
    throw sfd::config_error("sweep.label must be 'balanced' or 'null', got '" + protocol +
                            "'");
  spec.unconditional = protocol == "null";

  const auto cells =
      sfd::delta_t_sweep(spec, foundation, *compressor, ds.train_x, ds.train_y, ds.test_x);
  const std::string path = out_or(g, cfg, "io.sweep");
  sfd::write_sweep_csv(cells, path);
  sfd::write_sweep_plot(cells, cfg.get_text("io.plot"));

  for (const auto& [delta, median] : sfd::sweep_median(cells, "mmd"))
    std::printf("delta_t=%-5g median mmd %.6g\n", delta, median);
  std::printf("wrote %s and %s\n", path.c_str(), cfg.get_text("io.plot").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic-first diffusion over composite latents"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "config file (key = value lines)");
  app.add_option("--seed", g.seed, "override every stage seed");
  app.add_option("--out", g.out, "override the command's primary output path");
  app.add_option("--jobs", g.jobs, "concurrent sweep cells")->check(CLI::PositiveNumber);

  CLI::App* gen = app.add_subcommand("gen-data", "write the synthetic dataset");
  CLI::App* tsv = app.add_subcommand("train-semvae", "train + freeze the semantic compressor");
  CLI::App* tsf = app.add_subcommand("train-sfd", "train the dual-time velocity model");
  CLI::App* smp = app.add_subcommand("sample", "generate samples from a checkpoint");
  CLI::App* evl = app.add_subcommand("eval", "score samples against held-out data");
  CLI::App* swp = app.add_subcommand("sweep", "train/eval a delta_t x seed grid");
  for (CLI::App* sub : {gen, tsv, tsf, smp, evl, swp}) sub->fallthrough();

  smp->add_option("--label", g.label, "class index or 'null' (default: class-balanced)");
  smp->add_option("--steps", g.steps, "integration grid resolution");
  smp->add_option("--method", g.method, "euler | adaptive");
  smp->add_option("--guidance-scale", g.guidance, "field blend against the null label");
  smp->add_option("--delta-t", g.delta_t, "semantic lead at inference");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;  // malformed invocation is a configuration error
  }

  try {
    if (gen->parsed()) return cmd_gen_data(g);
    if (tsv->parsed()) return cmd_train_semvae(g);
    if (tsf->parsed()) return cmd_train_sfd(g);
    if (smp->parsed()) return cmd_sample(g);
    if (evl->parsed()) return cmd_eval(g);
    if (swp->parsed()) return cmd_sweep(g);
    std::fprintf(stderr, "no subcommand\n");
    return 3;
  } catch (const sfd::dependency_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const sfd::config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const sfd::divergence_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
