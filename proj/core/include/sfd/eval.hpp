#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfd/scheduler.hpp"
#include "sfd/tensor.hpp"
#include "sfd/train.hpp"

namespace sfd {

// ---------------------------------------------------------------------------
// Distribution metrics over sample sets, class-balanced generation, and the
// delta-t sweep harness.  Generated quality is always judged on the texture
// block z in data space; semantic samples are diagnostic only.
// ---------------------------------------------------------------------------

struct MetricReport {
  std::string name;
  double value = 0.0;
  std::size_t n_a = 0, n_b = 0;
  double param = 0.0;  // kernel bandwidth (sigma^2) or covariance regularizer
  std::uint64_t seed = 0;
};

// Median of pairwise squared distances over the pooled rows, halved.  A
// degenerate pool (all rows equal) falls back to 1.
double median_heuristic_bandwidth(const Tensor& a, const Tensor& b);

// Biased V-statistic MMD^2 with k(x, y) = exp(-|x-y|^2 / (2 sigma2)).
// sigma2 <= 0 selects the median heuristic.  Requires N, M >= 2.
double mmd_rbf(const Tensor& a, const Tensor& b, double sigma2 = 0.0);

struct GaussianMoments {
  Tensor mean;  // {D}
  Tensor cov;   // (D, D)
};

// Sample mean and 1/(N-1) covariance, regularized by +reg*I.  Requires N > D.
GaussianMoments fit_moments(const Tensor& x, double regularizer = 1e-6);

// |mu_a - mu_b|^2 + tr(cov_a + cov_b - 2 (cov_a cov_b)^{1/2}), clamped at 0
// against rounding.  not_psd_error if a covariance is degenerate even after
// regularization.
double frechet_gaussian_moments(const GaussianMoments& a, const GaussianMoments& b);
double frechet_gaussian(const Tensor& a, const Tensor& b, double regularizer = 1e-6);

// ---- generation ---------------------------------------------------------------

struct GeneratedSamples {
  Tensor sem;              // (K*n, C_s)
  Tensor tex;              // (K*n, C_z)
  std::vector<int> labels; // class-major: n rows of class 0, then 1, ...
};

// Exactly per_class samples for every class label, initial noise drawn from
// streams derived per (class, index) so the output is independent of class
// iteration order and of batching.
GeneratedSamples class_balanced_generate(const Denoiser& model, const SamplerConfig& cfg,
                                         std::size_t per_class, std::uint64_t seed);

// n samples all carrying `label`; the null label yields unconditional rows
// (and is never guided).  Noise streams derive per sample index.
GeneratedSamples generate_labeled(const Denoiser& model, const SamplerConfig& cfg, int label,
                                  std::size_t n, std::uint64_t seed);

// File format: header "C_s,C_z,N", then rows of C_s + C_z reals and the label.
void save_samples(const GeneratedSamples& g, const std::string& path);
GeneratedSamples load_samples(const std::string& path);

// ---- evaluation reports ---------------------------------------------------------

// mmd + frechet of gen_z vs real rows, plus the self-distance baseline on two
// disjoint halves of the real rows.  Row counts are capped at max_n from the
// front (deterministic).
std::vector<MetricReport> evaluate_samples(const Tensor& gen_z, const Tensor& real_x,
                                           std::size_t max_n, std::uint64_t seed);

void write_metrics_csv(const std::vector<MetricReport>& reports, const std::string& path);

// ---- delta-t sweep ---------------------------------------------------------------

struct SweepSpec {
  std::vector<double> deltas;        // each in [0, 1]
  std::vector<std::uint64_t> seeds;
  TrainConfig train;                 // per-cell budget; delta_t/seed overridden
  DenoiserConfig model;              // per-cell architecture
  SamplerConfig sample;              // delta_t overridden per cell
  std::size_t per_class = 32;
  std::size_t jobs = 1;
  bool unconditional = false;        // null-label rows instead of class-balanced
};

struct SweepCell {
  double delta_t = 0.0;
  std::uint64_t seed = 0;
  bool diverged = false;  // training or sampling divergence: missing cell
  double mmd = 0.0;
  double frechet = 0.0;
};

// Trains one model per (delta_t, seed) cell under identical budgets and
// scores the generated texture block against eval_x.  Cells run on up to
// spec.jobs threads; results are cell-order deterministic.
std::vector<SweepCell> delta_t_sweep(const SweepSpec& spec,
                                     const FoundationEncoder& foundation,
                                     const SemanticCompressor& compressor,
                                     const Tensor& train_x, const std::vector<int>& train_y,
                                     const Tensor& eval_x);

// Long-format CSV: delta_t,seed,metric,value; diverged cells contribute no rows.
void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path);

// Per-delta median over finished seeds for "mmd" or "frechet"; deltas in
// first-seen order.
std::vector<std::pair<double, double>> sweep_median(const std::vector<SweepCell>& cells,
                                                    const std::string& metric);

// Plain-text gnuplot script with the median curve and per-seed points inline.
void write_sweep_plot(const std::vector<SweepCell>& cells, const std::string& path);

}  // namespace sfd
