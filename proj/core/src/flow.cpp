#include "sfd/flow.hpp"

#include <cmath>

#include "sfd/error.hpp"

namespace sfd {

Tensor interpolate(const Tensor& x0, const Tensor& x1, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw contract_error("interpolate: t=" + std::to_string(t) + " outside [0,1]");
  return mul_scalar(x1, t) + mul_scalar(x0, 1.0 - t);
}

Tensor interpolate_rows(const Tensor& x0, const Tensor& x1, std::span<const double> t) {
  if (x0.shape() != x1.shape()) throw shape_error("interpolate_rows: endpoint shape mismatch");
  if (x0.rank() != 2 || t.size() != x0.rows())
    throw shape_error("interpolate_rows: need one time per batch row");
  const std::size_t n = t.size();
  std::vector<double> tv(t.begin(), t.end());
  std::vector<double> uv(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(t[i] >= 0.0 && t[i] <= 1.0))
      throw contract_error("interpolate_rows: t outside [0,1]");
    uv[i] = 1.0 - t[i];
  }
  return scale_rows(x1, Tensor::from({n}, std::move(tv))) +
         scale_rows(x0, Tensor::from({n}, std::move(uv)));
}

Tensor velocity_target(const Tensor& x0, const Tensor& x1) { return x1 - x0; }

Tensor velocity_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) throw shape_error("velocity_loss: shape mismatch");
  if (pred.rank() != 2) throw shape_error("velocity_loss: expected (B, C) inputs");
  return mean_all(row_sum(square(pred - target)));
}

double sample_time_logit_normal(Rng& rng, double loc, double scale) {
  if (!(scale > 0.0)) throw contract_error("sample_time_logit_normal: scale must be > 0");
  const double n = rng.normal();
  return 1.0 / (1.0 + std::exp(-(loc + scale * n)));
}

}  // namespace sfd
