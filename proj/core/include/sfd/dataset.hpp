#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfd/error.hpp"
#include "sfd/tensor.hpp"

namespace sfd {

// ---------------------------------------------------------------------------
// Synthetic mixture: K anisotropic components with means on a circle of
// radius R in the first two coordinates.  Each draw offsets the mean along
// the component tangent (scale sigma_tangent) and radius (sigma_radial), plus
// a sinusoidal texture ripple riding on the tangent coordinate — a small
// high-frequency detail the semantic channel should not need to carry.
// ---------------------------------------------------------------------------

struct ToyDataConfig {
  std::size_t dim = 2;      // D >= 2
  std::size_t classes = 8;  // K
  std::size_t n_train = 8192;
  std::size_t n_test = 2048;
  double radius = 4.0;
  double sigma_tangent = 0.6;
  double sigma_radial = 0.15;
  double ripple_amp = 0.1;
  double ripple_freq = 6.0;
  std::uint64_t seed = 0;
};

struct ToyDataset {
  std::size_t dim = 0;
  std::size_t classes = 0;
  Tensor train_x;  // (n_train, D)
  Tensor test_x;   // (n_test, D)
  std::vector<int> train_y;
  std::vector<int> test_y;
};

// Component means, one row per class: R * (cos, sin) in coords 0..1, zero
// elsewhere.
Tensor component_means(const ToyDataConfig& cfg);

ToyDataset generate_toy(const ToyDataConfig& cfg);

// Fraction of rows whose nearest component mean matches the label.
double nearest_mean_accuracy(const ToyDataConfig& cfg, const Tensor& x,
                             const std::vector<int>& y);

// File format: header "D,K,N" then N lines of D comma-separated reals plus
// the integer label.  Train rows come first; the split point is supplied by
// the caller on load.
void save_dataset(const ToyDataset& ds, const std::string& path);
ToyDataset load_dataset(const std::string& path, std::size_t n_train);

}  // namespace sfd
