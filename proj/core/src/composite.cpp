#include "sfd/composite.hpp"

#include <cmath>

#include "sfd/error.hpp"

namespace sfd {

FoundationEncoder::FoundationEncoder(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed)
    : in_dim_(in_dim), out_dim_(out_dim) {
  Rng rng(seed);
  // Unit-variance preactivations keep tanh responsive instead of saturated:
  // weights ~ N(0, 1/sqrt(D)) against inputs of typical magnitude ~R.
  std::vector<double> w(in_dim * out_dim), b(out_dim);
  const double sigma = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (auto& x : w) x = sigma * rng.normal();
  for (auto& x : b) x = 0.5 * rng.normal();
  w_ = Tensor::from({in_dim, out_dim}, std::move(w));
  b_ = Tensor::from({out_dim}, std::move(b));
}

Tensor FoundationEncoder::features(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != in_dim_)
    throw shape_error("FoundationEncoder: expected (B, " + std::to_string(in_dim_) + ") input");
  return tanh_(add_rows(matmul(x, w_), b_)).detach();
}

Tensor texture_encode(const Tensor& x) { return x; }
Tensor texture_decode(const Tensor& z) { return z; }

Tensor make_composite(const CompositeLatent& c) {
  if (!c.sem.defined() || !c.tex.defined())
    throw contract_error("make_composite: undefined block");
  return concat_cols(c.sem, c.tex);
}

CompositeLatent split_composite(const Tensor& c, std::size_t c_sem) {
  if (c.rank() != 2 || c_sem == 0 || c_sem >= c.cols())
    throw shape_error("split_composite: bad semantic width " + std::to_string(c_sem) +
                      " for composite with " + std::to_string(c.cols()) + " channels");
  return {slice_cols(c, 0, c_sem), slice_cols(c, c_sem, c.cols())};
}

}  // namespace sfd
