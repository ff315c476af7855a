#include "sfd/dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sfd/rng.hpp"

namespace sfd {

namespace {

void check_config(const ToyDataConfig& cfg) {
  if (cfg.dim < 2)
    throw contract_error("toy data: dim must be >= 2");
  if (cfg.classes == 0)
    throw contract_error("toy data: classes must be positive");
  if (cfg.radius <= 0.0 || cfg.sigma_tangent < 0.0 || cfg.sigma_radial < 0.0)
    throw contract_error("toy data: radius must be positive, sigmas non-negative");
}

// One sample of component k: mean + t*tangent + (s + A*sin(f*t))*radial, with
// ambient coordinates (index >= 2) drawn at the radial scale.
void draw_row(const ToyDataConfig& cfg, std::size_t k, Rng& rng, double* out) {
  const double theta =
      2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(cfg.classes);
  const double cx = std::cos(theta), sx = std::sin(theta);
  const double t = cfg.sigma_tangent * rng.normal();
  const double s = cfg.sigma_radial * rng.normal();
  const double ripple = cfg.ripple_amp * std::sin(cfg.ripple_freq * t);
  out[0] = cfg.radius * cx + t * (-sx) + (s + ripple) * cx;
  out[1] = cfg.radius * sx + t * cx + (s + ripple) * sx;
  for (std::size_t j = 2; j < cfg.dim; ++j)
    out[j] = cfg.sigma_radial * rng.normal();
}

}  // namespace

Tensor component_means(const ToyDataConfig& cfg) {
  check_config(cfg);
  std::vector<double> m(cfg.classes * cfg.dim, 0.0);
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    const double theta =
        2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(cfg.classes);
    m[k * cfg.dim + 0] = cfg.radius * std::cos(theta);
    m[k * cfg.dim + 1] = cfg.radius * std::sin(theta);
  }
  return Tensor::from({cfg.classes, cfg.dim}, m);
}

ToyDataset generate_toy(const ToyDataConfig& cfg) {
  check_config(cfg);
  Rng rng(cfg.seed);

  const std::size_t n = cfg.n_train + cfg.n_test;
  std::vector<double> x(n * cfg.dim);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = static_cast<std::size_t>(rng.next_u64() % cfg.classes);
    y[i] = static_cast<int>(k);
    draw_row(cfg, k, rng, x.data() + i * cfg.dim);
  }

  ToyDataset ds;
  ds.dim = cfg.dim;
  ds.classes = cfg.classes;
  ds.train_x = Tensor::from({cfg.n_train, cfg.dim},
                            {x.begin(), x.begin() + static_cast<std::ptrdiff_t>(
                                                        cfg.n_train * cfg.dim)});
  ds.test_x = Tensor::from({cfg.n_test, cfg.dim},
                           {x.begin() + static_cast<std::ptrdiff_t>(cfg.n_train * cfg.dim),
                            x.end()});
  ds.train_y.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(cfg.n_train));
  ds.test_y.assign(y.begin() + static_cast<std::ptrdiff_t>(cfg.n_train), y.end());
  return ds;
}

double nearest_mean_accuracy(const ToyDataConfig& cfg, const Tensor& x,
                             const std::vector<int>& y) {
  const Tensor means = component_means(cfg);
  const std::size_t n = x.rows(), d = x.cols();
  if (y.size() != n)
    throw contract_error("nearest_mean_accuracy: label count mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = 0.0;
    std::size_t argbest = 0;
    for (std::size_t k = 0; k < cfg.classes; ++k) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x.values()[i * d + j] - means.values()[k * d + j];
        d2 += diff * diff;
      }
      if (k == 0 || d2 < best) {
        best = d2;
        argbest = k;
      }
    }
    if (static_cast<int>(argbest) == y[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

void save_dataset(const ToyDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw format_error("dataset: cannot open '" + path + "' for writing");
  const std::size_t n = ds.train_x.rows() + ds.test_x.rows();
  out << ds.dim << "," << ds.classes << "," << n << "\n";
  char buf[64];
  auto write_rows = [&](const Tensor& x, const std::vector<int>& y) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", x.values()[i * x.cols() + j]);
        out << buf << ",";
      }
      out << y[i] << "\n";
    }
  };
  write_rows(ds.train_x, ds.train_y);
  write_rows(ds.test_x, ds.test_y);
  if (!out)
    throw format_error("dataset: write failed for '" + path + "'");
}

ToyDataset load_dataset(const std::string& path, std::size_t n_train) {
  std::ifstream in(path);
  if (!in)
    throw format_error("dataset: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw format_error("dataset: empty file '" + path + "'");

  std::size_t dim = 0, classes = 0, n = 0;
  {
    std::istringstream hdr(line);
    char c1 = 0, c2 = 0;
    if (!(hdr >> dim >> c1 >> classes >> c2 >> n) || c1 != ',' || c2 != ',')
      throw format_error("dataset: bad header in '" + path + "'");
  }
  if (n_train > n)
    throw format_error("dataset: split point exceeds row count");

  std::vector<double> x;
  x.reserve(n * dim);
  std::vector<int> y;
  y.reserve(n);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* p = line.c_str();
    char* end = nullptr;
    for (std::size_t j = 0; j < dim; ++j) {
      errno = 0;
      const double v = std::strtod(p, &end);
      if (end == p || *end != ',')
        throw format_error("dataset: bad record at row " + std::to_string(rows + 1));
      x.push_back(v);
      p = end + 1;
    }
    const long label = std::strtol(p, &end, 10);
    if (end == p || label < 0 || static_cast<std::size_t>(label) >= classes)
      throw format_error("dataset: bad label at row " + std::to_string(rows + 1));
    y.push_back(static_cast<int>(label));
    ++rows;
  }
  if (rows != n)
    throw format_error("dataset: expected " + std::to_string(n) + " rows, found " +
                       std::to_string(rows));

  ToyDataset ds;
  ds.dim = dim;
  ds.classes = classes;
  const std::size_t n_test = n - n_train;
  ds.train_x = Tensor::from({n_train, dim},
                            {x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n_train * dim)});
  ds.test_x = Tensor::from({n_test, dim},
                           {x.begin() + static_cast<std::ptrdiff_t>(n_train * dim), x.end()});
  ds.train_y.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.test_y.assign(y.begin() + static_cast<std::ptrdiff_t>(n_train), y.end());
  return ds;
}

}  // namespace sfd
