#include "sfd/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sfd {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void Config::register_u64(const std::string& key, std::uint64_t v, const std::string& doc) {
  Entry e;
  e.key = key;
  e.kind = Kind::u64;
  e.u64_value = v;
  e.doc = doc;
  entries_.push_back(std::move(e));
}

void Config::register_real(const std::string& key, double v, const std::string& doc) {
  Entry e;
  e.key = key;
  e.kind = Kind::real;
  e.real_value = v;
  e.doc = doc;
  entries_.push_back(std::move(e));
}

void Config::register_text(const std::string& key, const std::string& v, const std::string& doc) {
  Entry e;
  e.key = key;
  e.kind = Kind::text;
  e.text_value = v;
  e.doc = doc;
  entries_.push_back(std::move(e));
}

Config::Config() {
  // data.*: synthetic mixture generator
  register_u64("data.dim", 2, "ambient data dimension D");
  register_u64("data.classes", 8, "mixture components K, means on a circle");
  register_u64("data.n_train", 8192, "training rows");
  register_u64("data.n_test", 2048, "held-out rows");
  register_real("data.radius", 4.0, "circle radius for component means");
  register_real("data.sigma_tangent", 0.6, "component std along the tangent");
  register_real("data.sigma_radial", 0.15, "component std along the radius");
  register_real("data.ripple_amp", 0.1, "sinusoidal texture amplitude");
  register_real("data.ripple_freq", 6.0, "texture frequency along the tangent");
  register_u64("data.seed", 0, "generator seed");

  // features.*: frozen foundation encoder
  register_u64("features.dim", 64, "foundation feature width C_in");
  register_u64("features.seed", 7, "frozen random projection seed");

  // semvae.*: semantic compressor
  register_u64("semvae.latent", 16, "semantic channels C_s");
  register_u64("semvae.hidden", 64, "encoder/decoder hidden width");
  register_u64("semvae.blocks", 4, "residual blocks per side");
  register_u64("semvae.iterations", 2000, "optimizer steps");
  register_u64("semvae.batch", 128, "rows per step");
  register_real("semvae.lr", 1e-3, "AdamW learning rate");
  register_real("semvae.weight_decay", 0.0, "AdamW decoupled weight decay");
  register_real("semvae.kl_weight", 1e-7, "beta on the KL term");
  register_real("semvae.jitter", 0.01, "Gaussian feature jitter during training");
  register_u64("semvae.seed", 0, "training seed");
  register_text("semvae.compressor", "semvae", "semantic compressor: semvae | pca");

  // model.*: velocity network
  register_u64("model.hidden", 128, "denoiser width H (even)");
  register_u64("model.blocks", 4, "modulated residual blocks");
  register_u64("model.time_freqs", 32, "sinusoidal pairs per time embedder");
  register_u64("model.repa_depth", 2, "1-based block index of the alignment tap");
  register_text("model.repa_loss", "cosine+mse", "alignment loss: cosine | mse | cosine+mse");

  // train.*: dual-time flow-matching
  register_u64("train.iterations", 5000, "optimizer steps");
  register_u64("train.batch", 128, "rows per step");
  register_real("train.lr", 1e-3, "AdamW learning rate");
  register_real("train.weight_decay", 0.0, "AdamW decoupled weight decay");
  register_real("train.delta_t", 0.3, "semantic lead Delta t in [0,1]");
  register_real("train.beta", 2.0, "weight on the semantic velocity term");
  register_real("train.lambda_repa", 1.0, "weight on the alignment term");
  register_text("train.time_sampler", "logit_normal", "raw-time law: logit_normal | uniform");
  register_real("train.logit_loc", 0.0, "logit-normal location");
  register_real("train.logit_scale", 1.0, "logit-normal scale");
  register_real("train.label_drop", 0.1, "probability of the null label per row");
  register_u64("train.log_every", 50, "iterations between log rows");
  register_u64("train.checkpoint_every", 1000, "iterations between checkpoints");
  register_u64("train.seed", 0, "training seed");

  // sample.*: masked three-phase integration
  register_u64("sample.steps", 100, "euler grid resolution");
  register_text("sample.method", "euler", "integrator: euler | adaptive");
  register_real("sample.delta_t", 0.3, "semantic lead at inference");
  register_real("sample.atol", 1e-6, "adaptive absolute tolerance");
  register_real("sample.rtol", 1e-3, "adaptive relative tolerance");
  register_real("sample.guidance_scale", 1.0, "1.0 disables guidance");
  register_u64("sample.n_per_class", 128, "rows generated per class");
  register_u64("sample.seed", 0, "sampling seed");

  // eval.*: distribution metrics
  register_u64("eval.max_n", 2048, "subsample cap for the quadratic metric");

  // sweep.*: delta-t grid
  register_text("sweep.deltas", "0,0.1,0.2,0.3,0.5,1", "comma-separated delta_t cells");
  register_text("sweep.seeds", "0,1,2", "comma-separated seeds per cell");
  register_text("sweep.label", "balanced", "cell generation: balanced | null");

  // io.*: artifact paths (resolved relative to the working directory)
  register_text("io.dataset", "data.csv", "dataset path");
  register_text("io.semvae", "semvae.ckpt", "frozen compressor checkpoint");
  register_text("io.checkpoint", "sfd.ckpt", "denoiser checkpoint");
  register_text("io.log", "train_log.csv", "training log path");
  register_text("io.samples", "samples.csv", "generated sample path");
  register_text("io.metrics", "metrics.csv", "metric table path");
  register_text("io.sweep", "sweep.csv", "sweep result table");
  register_text("io.plot", "sweep.gp", "gnuplot script for the sweep");
}

Config::Entry& Config::find(const std::string& key) {
  for (auto& e : entries_)
    if (e.key == key) return e;
  throw config_error("unknown config key '" + key + "'");
}

const Config::Entry& Config::find(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.key == key) return e;
  throw config_error("unknown config key '" + key + "'");
}

bool Config::has(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.key == key) return true;
  return false;
}

Config::Kind Config::kind(const std::string& key) const { return find(key).kind; }

std::uint64_t Config::get_u64(const std::string& key) const {
  const Entry& e = find(key);
  if (e.kind != Kind::u64)
    throw config_error("config key '" + key + "' is not an integer");
  return e.u64_value;
}

double Config::get_real(const std::string& key) const {
  const Entry& e = find(key);
  if (e.kind == Kind::real) return e.real_value;
  if (e.kind == Kind::u64) return static_cast<double>(e.u64_value);
  throw config_error("config key '" + key + "' is not numeric");
}

const std::string& Config::get_text(const std::string& key) const {
  const Entry& e = find(key);
  if (e.kind != Kind::text)
    throw config_error("config key '" + key + "' is not text");
  return e.text_value;
}

void Config::set_u64(const std::string& key, std::uint64_t v) {
  Entry& e = find(key);
  if (e.kind != Kind::u64)
    throw config_error("config key '" + key + "' is not an integer");
  e.u64_value = v;
}

void Config::set_real(const std::string& key, double v) {
  Entry& e = find(key);
  if (e.kind != Kind::real)
    throw config_error("config key '" + key + "' is not real");
  e.real_value = v;
}

void Config::set_text(const std::string& key, const std::string& v) {
  Entry& e = find(key);
  if (e.kind != Kind::text)
    throw config_error("config key '" + key + "' is not text");
  e.text_value = v;
}

void Config::set_from_text(const std::string& key, const std::string& value) {
  Entry& e = find(key);
  const std::string v = trim(value);
  errno = 0;
  char* end = nullptr;
  switch (e.kind) {
    case Kind::u64: {
      if (v.empty() || v[0] == '-')
        throw config_error("config key '" + key + "': expected unsigned integer, got '" + v + "'");
      const unsigned long long parsed = std::strtoull(v.c_str(), &end, 10);
      if (errno != 0 || end == v.c_str() || *end != '\0')
        throw config_error("config key '" + key + "': expected unsigned integer, got '" + v + "'");
      e.u64_value = static_cast<std::uint64_t>(parsed);
      break;
    }
    case Kind::real: {
      const double parsed = std::strtod(v.c_str(), &end);
      if (end == v.c_str() || *end != '\0')
        throw config_error("config key '" + key + "': expected real, got '" + v + "'");
      e.real_value = parsed;
      break;
    }
    case Kind::text:
      e.text_value = v;
      break;
  }
}

std::string Config::serialize() const {
  std::ostringstream out;
  std::string section;
  for (const auto& e : entries_) {
    const std::string sec = e.key.substr(0, e.key.find('.'));
    if (sec != section) {
      if (!section.empty()) out << "\n";
      out << "# [" << sec << "]\n";
      section = sec;
    }
    out << e.key << " = ";
    switch (e.kind) {
      case Kind::u64: out << e.u64_value; break;
      case Kind::real: out << format_real(e.real_value); break;
      case Kind::text: out << e.text_value; break;
    }
    out << "  # " << e.doc << "\n";
  }
  return out.str();
}

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    c.set_from_text(key, value);
  }
  return c;
}

Config Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw config_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Config::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw config_error("cannot write config file '" + path + "'");
  out << serialize();
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.key);
  return out;
}

bool Config::operator==(const Config& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& a = entries_[i];
    const Entry& b = other.entries_[i];
    if (a.key != b.key || a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::u64:
        if (a.u64_value != b.u64_value) return false;
        break;
      case Kind::real:
        // Bit-pattern equality: the round-trip contract is exact, and NaN
        // never reaches a stored value.
        if (a.real_value != b.real_value) return false;
        break;
      case Kind::text:
        if (a.text_value != b.text_value) return false;
        break;
    }
  }
  return true;
}

}  // namespace sfd
