#pragma once

#include "sfd/rng.hpp"
#include "sfd/tensor.hpp"

namespace sfd {

// Linear interpolation path x_t = t*x1 + (1-t)*x0.  Requires t in [0, 1].
Tensor interpolate(const Tensor& x0, const Tensor& x1, double t);

// Per-sample interpolation with one time per row of a (B, C) batch.
Tensor interpolate_rows(const Tensor& x0, const Tensor& x1, std::span<const double> t);

// Constant velocity of the linear path: x1 - x0.
Tensor velocity_target(const Tensor& x0, const Tensor& x1);

// Velocity regression loss: mean over batch rows of the per-row sum of
// squared errors.  Inputs are (B, C).
Tensor velocity_loss(const Tensor& pred, const Tensor& target);

// Logit-normal time draw: sigmoid(loc + scale * n), n ~ N(0, 1).  scale > 0.
double sample_time_logit_normal(Rng& rng, double loc = 0.0, double scale = 1.0);

}  // namespace sfd
