#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sfd/rng.hpp"

namespace sfd {

using Shape = std::vector<std::size_t>;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily by backward()
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this node's grad into parents[i]->grad.  Only set on interior
  // nodes of a recorded graph.
  std::function<void()> backprop;

  std::size_t numel() const { return value.size(); }
};

}  // namespace detail

// Dense row-major f64 tensor with optional reverse-mode autodiff.  Value
// semantics are handle semantics: copies share the underlying node.  Graphs
// are recorded per forward pass (define-by-run) whenever an input requires
// gradients; backward(loss) accumulates d loss / d leaf into each leaf's
// grad buffer.
class Tensor {
 public:
  Tensor() = default;

  // ---- construction -------------------------------------------------------
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor from(Shape shape, std::vector<double> data);
  static Tensor scalar(double v) { return from({1}, {v}); }
  static Tensor randn(Shape shape, Rng& rng, double sigma = 1.0);
  // Trainable leaf.
  static Tensor param(Shape shape, std::vector<double> data);

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;  // rank-2 only

  std::span<const double> values() const;
  std::span<double> raw();  // in-place mutation (optimizer); leaf tensors only
  double at(std::size_t i) const;
  double at(std::size_t r, std::size_t c) const;
  double item() const;  // numel() == 1

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> grad_raw();
  void zero_grad();

  // Same values, no graph edge, no gradient requirement.
  Tensor detach() const;
  // Deep copy as an independent leaf (keeps requires_grad flag).
  Tensor clone() const;

  std::shared_ptr<detail::Node> node() const { return n_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> n_;
};

// ---- elementwise (equal shapes) -------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// ---- scalar ----------------------------------------------------------------
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

// ---- unary -----------------------------------------------------------------
Tensor neg(const Tensor& a);
Tensor exp_(const Tensor& a);
Tensor log_(const Tensor& a);
Tensor sqrt_(const Tensor& a);
Tensor tanh_(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// ---- linear algebra ---------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);  // rank-2 x rank-2
Tensor transpose(const Tensor& a);                // rank-2
Tensor reshape(const Tensor& a, Shape shape);

// ---- reductions -------------------------------------------------------------
Tensor sum_all(const Tensor& a);   // -> {1}
Tensor mean_all(const Tensor& a);  // -> {1}
Tensor row_sum(const Tensor& a);   // (B,C) -> {B}

// ---- broadcasts over the leading batch dimension ---------------------------
Tensor add_rows(const Tensor& a, const Tensor& bias);   // (B,C) + {C}
Tensor scale_rows(const Tensor& a, const Tensor& s);    // (B,C) * {B}

// Row-wise layer normalization without affine parameters.
Tensor layer_norm(const Tensor& a, double eps = 1e-6);

// ---- structure --------------------------------------------------------------
Tensor concat_cols(const Tensor& a, const Tensor& b);                 // (B,Ca)|(B,Cb)
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);   // [c0, c1)
Tensor gather_rows(const Tensor& table, std::span<const int> index);  // -> (B,C)

// ---- operators --------------------------------------------------------------
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }
inline Tensor operator+(double c, const Tensor& a) { return add_scalar(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return add_scalar(a, -c); }
inline Tensor operator-(double c, const Tensor& a) { return add_scalar(neg(a), c); }
inline Tensor operator*(const Tensor& a, double c) { return mul_scalar(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul_scalar(a, c); }
inline Tensor operator/(const Tensor& a, double c) { return mul_scalar(a, 1.0 / c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// Reverse-mode sweep from a scalar loss.  Throws contract_error unless
// loss.numel() == 1.  Leaf grads accumulate across calls until zero_grad().
void backward(const Tensor& loss);

}  // namespace sfd
