#include "sfd/rng.hpp"

#include <cmath>

namespace sfd {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(seed_ + counter_ * kGolden);
}

double Rng::uniform() {
  // Top 53 bits -> [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // u1 in (0, 1] keeps the log finite.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

double Rng::normal(double mu, double sigma) { return mu + sigma * normal(); }

Rng Rng::derive(std::uint64_t id) const {
  return Rng(mix64(seed_ ^ mix64(id + kGolden)));
}

}  // namespace sfd
