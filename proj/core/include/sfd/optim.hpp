#pragma once

#include <cstdint>
#include <vector>

#include "sfd/tensor.hpp"

namespace sfd {

// AdamW with decoupled weight decay and bias-corrected moments.  Holds one
// (m, v) pair per bound parameter; the binding order is the serialization
// order for checkpoints.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8, double weight_decay = 0.0);

  // One update from the gradients accumulated on the bound parameters.
  // Throws divergence_error when a gradient is non-finite.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  std::size_t size() const { return params_.size(); }
  const std::vector<double>& m(std::size_t i) const { return m_[i]; }
  const std::vector<double>& v(std::size_t i) const { return v_[i]; }

  // Checkpoint restore.
  void restore(std::uint64_t step, std::vector<std::vector<double>> m,
               std::vector<std::vector<double>> v);

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  std::uint64_t step_ = 0;
};

}  // namespace sfd
