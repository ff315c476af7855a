#pragma once

#include <cstdint>

#include "sfd/tensor.hpp"

namespace sfd {

// Frozen random feature map standing in for a pretrained vision encoder:
// features = tanh(x W + b) with fixed Gaussian weights drawn from a seed.
// Never trained; identical seeds give identical maps.
class FoundationEncoder {
 public:
  FoundationEncoder(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);

  // (B, in_dim) -> (B, out_dim); output is a constant leaf (no graph).
  Tensor features(const Tensor& x) const;

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }

 private:
  std::size_t in_dim_, out_dim_;
  Tensor w_, b_;
};

// Desk-scale texture codec: the identity map, so the texture latent equals
// the data and C_z == data dim.
Tensor texture_encode(const Tensor& x);
Tensor texture_decode(const Tensor& z);

// Channel-concatenated composite latent c = [s | z].
struct CompositeLatent {
  Tensor sem;  // (B, C_s)
  Tensor tex;  // (B, C_z)

  std::size_t sem_dim() const { return sem.cols(); }
  std::size_t tex_dim() const { return tex.cols(); }
};

Tensor make_composite(const CompositeLatent& c);                     // -> (B, C_s + C_z)
CompositeLatent split_composite(const Tensor& c, std::size_t c_sem); // inverse

}  // namespace sfd
