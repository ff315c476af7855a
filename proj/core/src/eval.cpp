#include "sfd/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "sfd/linalg.hpp"

namespace sfd {

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

void check_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw contract_error("metric: inputs must be rank-2 sample matrices");
  if (a.cols() != b.cols())
    throw contract_error("metric: sample dimension mismatch");
}

Tensor head_rows(const Tensor& x, std::size_t n) {
  if (x.rows() <= n) return x;
  const std::size_t d = x.cols();
  std::vector<double> out(x.values().begin(),
                          x.values().begin() + static_cast<std::ptrdiff_t>(n * d));
  return Tensor::from({n, d}, out);
}

}  // namespace

double median_heuristic_bandwidth(const Tensor& a, const Tensor& b) {
  check_rows(a, b);
  const std::size_t d = a.cols();
  const std::size_t n = a.rows() + b.rows();
  if (n < 2)
    throw contract_error("median heuristic: need at least two pooled rows");
  std::vector<const double*> rows(n);
  for (std::size_t i = 0; i < a.rows(); ++i) rows[i] = a.values().data() + i * d;
  for (std::size_t i = 0; i < b.rows(); ++i) rows[a.rows() + i] = b.values().data() + i * d;

  std::vector<double> d2;
  d2.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d2.push_back(sq_dist(rows[i], rows[j], d));

  const std::size_t mid = d2.size() / 2;
  std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid), d2.end());
  const double median = d2[mid];
  if (median <= 0.0) return 1.0;
  return median / 2.0;
}

double mmd_rbf(const Tensor& a, const Tensor& b, double sigma2) {
  check_rows(a, b);
  const std::size_t n = a.rows(), m = b.rows(), d = a.cols();
  if (n < 2 || m < 2)
    throw contract_error("mmd_rbf: need at least two rows per set");
  if (sigma2 <= 0.0) sigma2 = median_heuristic_bandwidth(a, b);
  const double inv = 1.0 / (2.0 * sigma2);

  auto kernel_sum = [&](const Tensor& x, const Tensor& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < y.rows(); ++j)
        s += std::exp(-inv * sq_dist(x.values().data() + i * d, y.values().data() + j * d, d));
    return s;
  };

  const double saa = kernel_sum(a, a);
  const double sbb = kernel_sum(b, b);
  const double sab = kernel_sum(a, b);
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  return saa / (nn * nn) + sbb / (mm * mm) - 2.0 * sab / (nn * mm);
}

GaussianMoments fit_moments(const Tensor& x, double regularizer) {
  if (x.rank() != 2)
    throw contract_error("fit_moments: input must be rank-2");
  const std::size_t n = x.rows(), d = x.cols();
  if (n <= d)
    throw contract_error("fit_moments: need more rows than dimensions");

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x.values()[i * d + j];
  for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);

  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < d; ++p) {
      const double xp = x.values()[i * d + p] - mean[p];
      for (std::size_t q = p; q < d; ++q)
        cov[p * d + q] += xp * (x.values()[i * d + q] - mean[q]);
    }
  const double scale = 1.0 / static_cast<double>(n - 1);
  for (std::size_t p = 0; p < d; ++p)
    for (std::size_t q = p; q < d; ++q) {
      const double v = cov[p * d + q] * scale + (p == q ? regularizer : 0.0);
      cov[p * d + q] = v;
      cov[q * d + p] = v;
    }

  return {Tensor::from({d}, mean), Tensor::from({d, d}, cov)};
}

double frechet_gaussian_moments(const GaussianMoments& a, const GaussianMoments& b) {
  const std::size_t d = a.mean.numel();
  if (b.mean.numel() != d || a.cov.rows() != d || b.cov.rows() != d)
    throw contract_error("frechet: moment dimension mismatch");

  double mean_term = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a.mean.values()[j] - b.mean.values()[j];
    mean_term += diff * diff;
  }

  // tr((cov_a cov_b)^{1/2}) via the symmetric similar form
  // S = cov_b^{1/2} cov_a cov_b^{1/2}, which shares its eigenvalues.
  const Tensor rb = sqrtm_psd(b.cov);
  std::vector<double> tmp(d * d, 0.0), inner(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      const double r = rb.values()[i * d + k];
      if (r == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j)
        tmp[i * d + j] += r * a.cov.values()[k * d + j];
    }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      const double t = tmp[i * d + k];
      if (t == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j)
        inner[i * d + j] += t * rb.values()[k * d + j];
    }
  // Symmetrize before the PSD square root: rounding breaks exact symmetry.
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double s = 0.5 * (inner[i * d + j] + inner[j * d + i]);
      inner[i * d + j] = s;
      inner[j * d + i] = s;
    }
  const Tensor root = sqrtm_psd(Tensor::from({d, d}, inner));

  double trace_term = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    trace_term += a.cov.values()[i * d + i] + b.cov.values()[i * d + i] -
                  2.0 * root.values()[i * d + i];

  const double value = mean_term + trace_term;
  return value < 0.0 ? 0.0 : value;
}

double frechet_gaussian(const Tensor& a, const Tensor& b, double regularizer) {
  check_rows(a, b);
  return frechet_gaussian_moments(fit_moments(a, regularizer), fit_moments(b, regularizer));
}

// ---- generation ---------------------------------------------------------------

namespace {

// Integrates one batch of same-label rows from noise drawn per sample out of
// master.derive(id_offset + i).  Guidance blends against the null label and
// never applies to null-label rows themselves.
CompositeLatent generate_batch(const Denoiser& model, const SamplerConfig& cfg, int label,
                               std::size_t n, const Rng& master, std::size_t id_offset) {
  const auto& mc = model.config();
  const std::size_t c_s = mc.sem_dim, c_z = mc.tex_dim;

  std::vector<double> s0(n * c_s), z0(n * c_z);
  for (std::size_t i = 0; i < n; ++i) {
    Rng stream = master.derive(id_offset + i);
    for (std::size_t j = 0; j < c_s; ++j) s0[i * c_s + j] = stream.normal();
    for (std::size_t j = 0; j < c_z; ++j) z0[i * c_z + j] = stream.normal();
  }

  const bool guided = cfg.guidance_scale != 1.0 && label != model.null_label();
  auto make_field = [&](std::size_t rows) {
    BatchField field = denoiser_field(model, std::vector<int>(rows, label));
    if (guided)
      field = guided_field(std::move(field),
                           denoiser_field(model, std::vector<int>(rows, model.null_label())),
                           cfg.guidance_scale);
    return field;
  };

  if (cfg.method == SamplerConfig::Method::euler) {
    const CompositeLatent x0{Tensor::from({n, c_s}, s0), Tensor::from({n, c_z}, z0)};
    return integrate_euler(make_field(n), x0,
                           InferenceSchedule::build(cfg.steps, cfg.delta_t));
  }

  // The adaptive controller couples rows through its error norm; keep the
  // per-sample independence contract by integrating one row at a time.
  std::vector<double> s1(n * c_s), z1(n * c_z);
  const BatchField row_field = make_field(1);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> si(s0.begin() + static_cast<std::ptrdiff_t>(i * c_s),
                           s0.begin() + static_cast<std::ptrdiff_t>((i + 1) * c_s));
    std::vector<double> zi(z0.begin() + static_cast<std::ptrdiff_t>(i * c_z),
                           z0.begin() + static_cast<std::ptrdiff_t>((i + 1) * c_z));
    const CompositeLatent yi = integrate_adaptive(
        row_field, {Tensor::from({1, c_s}, si), Tensor::from({1, c_z}, zi)}, cfg);
    std::copy(yi.sem.values().begin(), yi.sem.values().end(),
              s1.begin() + static_cast<std::ptrdiff_t>(i * c_s));
    std::copy(yi.tex.values().begin(), yi.tex.values().end(),
              z1.begin() + static_cast<std::ptrdiff_t>(i * c_z));
  }
  return {Tensor::from({n, c_s}, s1), Tensor::from({n, c_z}, z1)};
}

}  // namespace

GeneratedSamples class_balanced_generate(const Denoiser& model, const SamplerConfig& cfg,
                                         std::size_t per_class, std::uint64_t seed) {
  if (per_class == 0)
    throw contract_error("class_balanced_generate: per_class must be positive");
  const auto& mc = model.config();
  const std::size_t k = mc.num_classes;
  const std::size_t c_s = mc.sem_dim, c_z = mc.tex_dim;
  const Rng master(seed);

  GeneratedSamples out;
  out.labels.reserve(k * per_class);
  std::vector<double> sem(k * per_class * c_s), tex(k * per_class * c_z);

  for (std::size_t cls = 0; cls < k; ++cls) {
    const CompositeLatent x1 = generate_batch(model, cfg, static_cast<int>(cls), per_class,
                                              master, cls * per_class);
    std::copy(x1.sem.values().begin(), x1.sem.values().end(),
              sem.begin() + static_cast<std::ptrdiff_t>(cls * per_class * c_s));
    std::copy(x1.tex.values().begin(), x1.tex.values().end(),
              tex.begin() + static_cast<std::ptrdiff_t>(cls * per_class * c_z));
    for (std::size_t i = 0; i < per_class; ++i) out.labels.push_back(static_cast<int>(cls));
  }

  out.sem = Tensor::from({k * per_class, c_s}, sem);
  out.tex = Tensor::from({k * per_class, c_z}, tex);
  return out;
}

GeneratedSamples generate_labeled(const Denoiser& model, const SamplerConfig& cfg, int label,
                                  std::size_t n, std::uint64_t seed) {
  if (n == 0)
    throw contract_error("generate_labeled: n must be positive");
  if (label < 0 || label > model.null_label())
    throw contract_error("generate_labeled: label out of range");
  GeneratedSamples out;
  const CompositeLatent x1 = generate_batch(model, cfg, label, n, Rng(seed), 0);
  out.sem = x1.sem;
  out.tex = x1.tex;
  out.labels.assign(n, label);
  return out;
}

void save_samples(const GeneratedSamples& g, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw format_error("samples: cannot open '" + path + "' for writing");
  const std::size_t n = g.tex.rows(), c_s = g.sem.cols(), c_z = g.tex.cols();
  if (g.sem.rows() != n || g.labels.size() != n)
    throw contract_error("samples: row count mismatch");
  out << c_s << "," << c_z << "," << n << "\n";
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c_s; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", g.sem.values()[i * c_s + j]);
      out << buf << ",";
    }
    for (std::size_t j = 0; j < c_z; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", g.tex.values()[i * c_z + j]);
      out << buf << ",";
    }
    out << g.labels[i] << "\n";
  }
  if (!out)
    throw format_error("samples: write failed for '" + path + "'");
}

GeneratedSamples load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw format_error("samples: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw format_error("samples: empty file");
  std::size_t c_s = 0, c_z = 0, n = 0;
  {
    std::istringstream hdr(line);
    char c1 = 0, c2 = 0;
    if (!(hdr >> c_s >> c1 >> c_z >> c2 >> n) || c1 != ',' || c2 != ',')
      throw format_error("samples: bad header");
  }
  std::vector<double> sem;
  sem.reserve(n * c_s);
  std::vector<double> tex;
  tex.reserve(n * c_z);
  GeneratedSamples g;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* p = line.c_str();
    char* end = nullptr;
    for (std::size_t j = 0; j < c_s + c_z; ++j) {
      const double v = std::strtod(p, &end);
      if (end == p || *end != ',')
        throw format_error("samples: bad record at row " + std::to_string(rows + 1));
      (j < c_s ? sem : tex).push_back(v);
      p = end + 1;
    }
    const long label = std::strtol(p, &end, 10);
    if (end == p)
      throw format_error("samples: bad label at row " + std::to_string(rows + 1));
    g.labels.push_back(static_cast<int>(label));
    ++rows;
  }
  if (rows != n)
    throw format_error("samples: expected " + std::to_string(n) + " rows");
  g.sem = Tensor::from({n, c_s}, sem);
  g.tex = Tensor::from({n, c_z}, tex);
  return g;
}

// ---- evaluation reports ----------------------------------------------------------

std::vector<MetricReport> evaluate_samples(const Tensor& gen_z, const Tensor& real_x,
                                           std::size_t max_n, std::uint64_t seed) {
  const Tensor a = head_rows(gen_z, max_n);
  const Tensor b = head_rows(real_x, max_n);

  std::vector<MetricReport> reports;
  const double bw = median_heuristic_bandwidth(a, b);
  reports.push_back({"mmd", mmd_rbf(a, b, bw), a.rows(), b.rows(), bw, seed});
  reports.push_back({"frechet", frechet_gaussian(a, b), a.rows(), b.rows(), 1e-6, seed});

  // Self-distance baseline: two disjoint halves of the real rows.
  const std::size_t half = real_x.rows() / 2;
  if (half >= 2) {
    const std::size_t take = std::min(half, max_n);
    const std::size_t d = real_x.cols();
    std::vector<double> first(real_x.values().begin(),
                              real_x.values().begin() +
                                  static_cast<std::ptrdiff_t>(take * d));
    std::vector<double> second(
        real_x.values().begin() + static_cast<std::ptrdiff_t>(half * d),
        real_x.values().begin() + static_cast<std::ptrdiff_t>((half + take) * d));
    const Tensor ra = Tensor::from({take, d}, first);
    const Tensor rb = Tensor::from({take, d}, second);
    const double bw2 = median_heuristic_bandwidth(ra, rb);
    reports.push_back({"mmd_real_split", mmd_rbf(ra, rb, bw2), take, take, bw2, seed});
    if (take > d)
      reports.push_back(
          {"frechet_real_split", frechet_gaussian(ra, rb), take, take, 1e-6, seed});
  }

  for (const MetricReport& r : reports)
    if (!std::isfinite(r.value))
      throw contract_error("evaluate_samples: non-finite metric " + r.name);
  return reports;
}

void write_metrics_csv(const std::vector<MetricReport>& reports, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw format_error("metrics: cannot open '" + path + "' for writing");
  out << "metric,value,n_a,n_b,param,seed\n";
  char buf[64];
  for (const MetricReport& r : reports) {
    out << r.name << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.value);
    out << buf << "," << r.n_a << "," << r.n_b << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.param);
    out << buf << "," << r.seed << "\n";
  }
}

// ---- delta-t sweep ----------------------------------------------------------------

std::vector<SweepCell> delta_t_sweep(const SweepSpec& spec,
                                     const FoundationEncoder& foundation,
                                     const SemanticCompressor& compressor,
                                     const Tensor& train_x, const std::vector<int>& train_y,
                                     const Tensor& eval_x) {
  for (double d : spec.deltas)
    if (d < 0.0 || d > 1.0)
      throw contract_error("delta_t_sweep: deltas must lie in [0,1]");
  if (spec.deltas.empty() || spec.seeds.empty())
    throw contract_error("delta_t_sweep: empty grid");

  std::vector<SweepCell> cells;
  for (double d : spec.deltas)
    for (std::uint64_t s : spec.seeds) cells.push_back({d, s, false, 0.0, 0.0});

  auto run_cell = [&](SweepCell& cell) {
    try {
      TrainConfig tc = spec.train;
      tc.delta_t = cell.delta_t;
      tc.seed = cell.seed;

      Rng init = Rng(cell.seed).derive(0x5FD0);
      Denoiser model(spec.model, init);
      AdamW opt(model.params(), tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay);
      train_sfd(tc, model, opt, foundation, compressor, train_x, train_y);

      SamplerConfig sc = spec.sample;
      sc.delta_t = cell.delta_t;
      // Distinct master seed for generation so its derived streams cannot
      // collide with the training streams of the same cell seed.
      const std::uint64_t gen_seed = cell.seed ^ 0x47454E5345454Dull;
      const GeneratedSamples gen =
          spec.unconditional
              ? generate_labeled(model, sc, model.null_label(),
                                 spec.per_class * spec.model.num_classes, gen_seed)
              : class_balanced_generate(model, sc, spec.per_class, gen_seed);

      cell.mmd = mmd_rbf(gen.tex, eval_x);
      cell.frechet = frechet_gaussian(gen.tex, eval_x);
      if (!std::isfinite(cell.mmd) || !std::isfinite(cell.frechet)) cell.diverged = true;
    } catch (const divergence_error&) {
      cell.diverged = true;
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, spec.jobs);
  if (jobs == 1) {
    for (SweepCell& cell : cells) run_cell(cell);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        run_cell(cells[i]);
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(jobs, cells.size()); ++t)
      pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  return cells;
}

void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw format_error("sweep: cannot open '" + path + "' for writing");
  out << "delta_t,seed,metric,value\n";
  char buf[64];
  for (const SweepCell& c : cells) {
    if (c.diverged) continue;  // missing cell
    for (const auto& [name, value] :
         std::initializer_list<std::pair<const char*, double>>{{"mmd", c.mmd},
                                                               {"frechet", c.frechet}}) {
      std::snprintf(buf, sizeof(buf), "%.17g", c.delta_t);
      out << buf << "," << c.seed << "," << name << ",";
      std::snprintf(buf, sizeof(buf), "%.17g", value);
      out << buf << "\n";
    }
  }
}

std::vector<std::pair<double, double>> sweep_median(const std::vector<SweepCell>& cells,
                                                    const std::string& metric) {
  if (metric != "mmd" && metric != "frechet")
    throw contract_error("sweep_median: unknown metric '" + metric + "'");
  std::vector<double> deltas;
  for (const SweepCell& c : cells)
    if (std::find(deltas.begin(), deltas.end(), c.delta_t) == deltas.end())
      deltas.push_back(c.delta_t);

  std::vector<std::pair<double, double>> out;
  for (double d : deltas) {
    std::vector<double> vals;
    for (const SweepCell& c : cells)
      if (c.delta_t == d && !c.diverged)
        vals.push_back(metric == "mmd" ? c.mmd : c.frechet);
    if (vals.empty()) continue;
    std::sort(vals.begin(), vals.end());
    const std::size_t mid = vals.size() / 2;
    const double median =
        vals.size() % 2 == 1 ? vals[mid] : 0.5 * (vals[mid - 1] + vals[mid]);
    out.emplace_back(d, median);
  }
  return out;
}

void write_sweep_plot(const std::vector<SweepCell>& cells, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw format_error("sweep: cannot open '" + path + "' for writing");
  const auto mmd = sweep_median(cells, "mmd");
  const auto fre = sweep_median(cells, "frechet");
  char buf[64];

  out << "# generated sweep plot: median metric vs delta_t\n";
  out << "$Median << EOD\n";
  for (std::size_t i = 0; i < mmd.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", mmd[i].first);
    out << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", mmd[i].second);
    out << " " << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", i < fre.size() ? fre[i].second : 0.0);
    out << " " << buf << "\n";
  }
  out << "EOD\n";
  out << "$Cells << EOD\n";
  for (const SweepCell& c : cells) {
    if (c.diverged) continue;
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g", c.delta_t, c.mmd, c.frechet);
    out << buf << "\n";
  }
  out << "EOD\n";
  out << "set xlabel 'delta_t'\n";
  out << "set ylabel 'metric'\n";
  out << "set key top left\n";
  out << "plot $Median using 1:2 with linespoints title 'median mmd', \\\n";
  out << "     $Median using 1:3 with linespoints title 'median frechet', \\\n";
  out << "     $Cells using 1:2 with points pt 6 title 'mmd per seed'\n";
}

}  // namespace sfd
