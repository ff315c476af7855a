#include "sfd/optim.hpp"

#include <cmath>

#include "sfd/error.hpp"

namespace sfd {

AdamW::AdamW(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps,
             double weight_decay)
    : params_(std::move(params)),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      weight_decay_(weight_decay) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    auto p = params_[pi].raw();
    auto g = params_[pi].grad_raw();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw divergence_error("adamw_step: non-finite gradient at parameter " +
                               std::to_string(pi));
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      // Decoupled decay: applied to the parameter, not the gradient.
      p[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * p[i]);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void AdamW::restore(std::uint64_t step, std::vector<std::vector<double>> m,
                    std::vector<std::vector<double>> v) {
  if (m.size() != params_.size() || v.size() != params_.size())
    throw contract_error("AdamW::restore: moment count does not match parameter count");
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (m[i].size() != params_[i].numel() || v[i].size() != params_[i].numel())
      throw contract_error("AdamW::restore: moment size mismatch at parameter " +
                           std::to_string(i));
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace sfd
