#pragma once

#include <cstdint>

namespace sfd {

// Counter-based pseudo-random generator.  The state is (seed, counter); each
// draw hashes the pair with the splitmix64 finalizer, so the sequence depends
// only on integer arithmetic and is reproducible across platforms.  Streams
// for independent work items are derived with derive(), which mixes a stream
// id into the seed instead of splitting the sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (consumes two uniforms per call, the sine
  // branch is discarded so the draw schedule stays one-call-one-value).
  double normal();
  double normal(double mu, double sigma);

  // Child generator for stream `id`; independent of draws made on *this.
  Rng derive(std::uint64_t id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }
  static Rng restore(std::uint64_t seed, std::uint64_t counter) {
    Rng r(seed);
    r.counter_ = counter;
    return r;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace sfd
