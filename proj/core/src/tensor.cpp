#include "sfd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "sfd/error.hpp"

namespace sfd {
namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

NodePtr make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  if (n->value.size() != shape_numel(n->shape))
    throw shape_error("tensor data size does not match shape " + shape_str(n->shape));
  return n;
}

bool tracked(const NodePtr& n) {
  return n->requires_grad || !n->parents.empty();
}

// Result node; records parents + backprop only when a parent is tracked.
NodePtr make_op(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
                std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool need = false;
  for (const auto& p : parents) need = need || tracked(p);
  if (need) {
    n->parents = std::move(parents);
    Node* raw = n.get();
    n->backprop = [raw, fn = std::move(backprop)]() { fn(*raw); };
  }
  return n;
}

void ensure_grad(Node& n) {
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw shape_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                      " vs " + shape_str(b.shape()));
}

void check_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw shape_error(std::string(op) + ": expected rank-2 tensor, got " +
                                       shape_str(a.shape()));
}

}  // namespace

// ---- Tensor basics ----------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
  std::size_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), false));
}

Tensor Tensor::full(Shape shape, double v) {
  std::size_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, v), false));
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
  return Tensor(make_leaf(std::move(shape), std::move(data), false));
}

Tensor Tensor::randn(Shape shape, Rng& rng, double sigma) {
  std::size_t n = shape_numel(shape);
  std::vector<double> d(n);
  for (auto& x : d) x = sigma * rng.normal();
  return Tensor(make_leaf(std::move(shape), std::move(d), false));
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
  return Tensor(make_leaf(std::move(shape), std::move(data), true));
}

const Shape& Tensor::shape() const {
  if (!n_) throw contract_error("use of undefined tensor");
  return n_->shape;
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw shape_error("rows(): tensor is not rank-2");
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw shape_error("cols(): tensor is not rank-2");
  return shape()[1];
}

std::span<const double> Tensor::values() const {
  if (!n_) throw contract_error("use of undefined tensor");
  return {n_->value.data(), n_->value.size()};
}

std::span<double> Tensor::raw() {
  if (!n_) throw contract_error("use of undefined tensor");
  return {n_->value.data(), n_->value.size()};
}

double Tensor::at(std::size_t i) const { return values()[i]; }

double Tensor::at(std::size_t r, std::size_t c) const {
  check_rank2(*this, "at");
  return n_->value[r * cols() + c];
}

double Tensor::item() const {
  if (numel() != 1) throw shape_error("item(): tensor has " + std::to_string(numel()) +
                                      " elements, expected 1");
  return n_->value[0];
}

bool Tensor::requires_grad() const { return n_ && n_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!n_) throw contract_error("use of undefined tensor");
  n_->requires_grad = on;
}

bool Tensor::has_grad() const { return n_ && n_->grad.size() == n_->value.size(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw contract_error("tensor has no gradient buffer (run backward first)");
  return {n_->grad.data(), n_->grad.size()};
}

std::span<double> Tensor::grad_raw() {
  if (!n_) throw contract_error("use of undefined tensor");
  ensure_grad(*n_);
  return {n_->grad.data(), n_->grad.size()};
}

void Tensor::zero_grad() {
  if (n_) n_->grad.assign(n_->value.size(), 0.0);
}

Tensor Tensor::detach() const {
  if (!n_) throw contract_error("use of undefined tensor");
  return Tensor(make_leaf(n_->shape, n_->value, false));
}

Tensor Tensor::clone() const {
  if (!n_) throw contract_error("use of undefined tensor");
  return Tensor(make_leaf(n_->shape, n_->value, n_->requires_grad));
}

// ---- elementwise ------------------------------------------------------------

namespace {

template <class Fwd, class Bwd>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
  check_same_shape(a, b, name);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[i]);
  auto an = a.node();
  auto bn = b.node();
  return Tensor(make_op(a.shape(), std::move(out), {an, bn}, [an, bn, bwd](Node& self) {
    ensure_grad(*an);
    ensure_grad(*bn);
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      auto [da, db] = bwd(an->value[i], bn->value[i], self.value[i]);
      an->grad[i] += self.grad[i] * da;
      bn->grad[i] += self.grad[i] * db;
    }
  }));
}

template <class Fwd, class Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  auto an = a.node();
  return Tensor(make_op(a.shape(), std::move(out), {an}, [an, bwd](Node& self) {
    ensure_grad(*an);
    for (std::size_t i = 0; i < self.value.size(); ++i)
      an->grad[i] += self.grad[i] * bwd(an->value[i], self.value[i]);
  }));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "add", [](double x, double y) { return x + y; },
                   [](double, double, double) { return std::pair{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "sub", [](double x, double y) { return x - y; },
                   [](double, double, double) { return std::pair{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "mul", [](double x, double y) { return x * y; },
                   [](double x, double y, double) { return std::pair{y, x}; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "div", [](double x, double y) { return x / y; },
                   [](double x, double y, double) {
                     return std::pair{1.0 / y, -x / (y * y)};
                   });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_op(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
  return unary_op(a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Tensor neg(const Tensor& a) {
  return unary_op(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor exp_(const Tensor& a) {
  return unary_op(a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor log_(const Tensor& a) {
  return unary_op(a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor sqrt_(const Tensor& a) {
  return unary_op(a, [](double x) { return std::sqrt(x); },
                  [](double, double y) { return 0.5 / y; });
}

Tensor tanh_(const Tensor& a) {
  return unary_op(a, [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& a) {
  return unary_op(a,
                  [](double x) { return x / (1.0 + std::exp(-x)); },
                  [](double x, double) {
                    const double s = 1.0 / (1.0 + std::exp(-x));
                    return s * (1.0 + x * (1.0 - s));
                  });
}

Tensor square(const Tensor& a) {
  return unary_op(a, [](double x) { return x * x; },
                  [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw contract_error("clamp: lo > hi");
  return unary_op(a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
                  [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw shape_error("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                      shape_str(b.shape()));
  const double* A = a.values().data();
  const double* B = b.values().data();
  std::vector<double> out(m * n, 0.0);
  // i-k-j order: stream rows of B, accumulate into the output row.  Each
  // output row depends only on its own input row, so results are identical
  // for any batch composition.
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = out.data() + i * n;
    const double* ai = A + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      const double* bk = B + kk * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return Tensor(make_op({m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](Node& self) {
    ensure_grad(*an);
    ensure_grad(*bn);
    const double* G = self.grad.data();
    const double* A = an->value.data();
    const double* B = bn->value.data();
    // dA = G * B^T
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) {
        double acc = 0.0;
        const double* gi = G + i * n;
        const double* bk = B + kk * n;
        for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bk[j];
        an->grad[i * k + kk] += acc;
      }
    // dB = A^T * G
    for (std::size_t i = 0; i < m; ++i) {
      const double* ai = A + i * k;
      const double* gi = G + i * n;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = ai[kk];
        double* bg = bn->grad.data() + kk * n;
        for (std::size_t j = 0; j < n; ++j) bg[j] += av * gi[j];
      }
    }
  }));
}

Tensor transpose(const Tensor& a) {
  check_rank2(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.values()[i * n + j];
  auto an = a.node();
  return Tensor(make_op({n, m}, std::move(out), {an}, [an, m, n](Node& self) {
    ensure_grad(*an);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += self.grad[j * m + i];
  }));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw shape_error("reshape: element count mismatch " + shape_str(a.shape()) + " -> " +
                      shape_str(shape));
  auto an = a.node();
  std::vector<double> out(a.values().begin(), a.values().end());
  return Tensor(make_op(std::move(shape), std::move(out), {an}, [an](Node& self) {
    ensure_grad(*an);
    for (std::size_t i = 0; i < self.value.size(); ++i) an->grad[i] += self.grad[i];
  }));
}

// ---- reductions ---------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  auto an = a.node();
  return Tensor(make_op({1}, {s}, {an}, [an](Node& self) {
    ensure_grad(*an);
    for (auto& g : an->grad) g += self.grad[0];
  }));
}

Tensor mean_all(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.numel());
  double s = 0.0;
  for (double x : a.values()) s += x;
  auto an = a.node();
  return Tensor(make_op({1}, {s * inv}, {an}, [an, inv](Node& self) {
    ensure_grad(*an);
    for (auto& g : an->grad) g += self.grad[0] * inv;
  }));
}

Tensor row_sum(const Tensor& a) {
  check_rank2(a, "row_sum");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += a.values()[i * n + j];
  auto an = a.node();
  return Tensor(make_op({m}, std::move(out), {an}, [an, m, n](Node& self) {
    ensure_grad(*an);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += self.grad[i];
  }));
}

// ---- leading-batch broadcasts ---------------------------------------------------

Tensor add_rows(const Tensor& a, const Tensor& bias) {
  check_rank2(a, "add_rows");
  if (bias.rank() != 1 || bias.numel() != a.cols())
    throw shape_error("add_rows: bias shape " + shape_str(bias.shape()) +
                      " does not match columns of " + shape_str(a.shape()));
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.values()[i * n + j] + bias.values()[j];
  auto an = a.node();
  auto bn = bias.node();
  return Tensor(make_op({m, n}, std::move(out), {an, bn}, [an, bn, m, n](Node& self) {
    ensure_grad(*an);
    ensure_grad(*bn);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        an->grad[i * n + j] += self.grad[i * n + j];
        bn->grad[j] += self.grad[i * n + j];
      }
  }));
}

Tensor scale_rows(const Tensor& a, const Tensor& s) {
  check_rank2(a, "scale_rows");
  if (s.rank() != 1 || s.numel() != a.rows())
    throw shape_error("scale_rows: scale shape " + shape_str(s.shape()) +
                      " does not match rows of " + shape_str(a.shape()));
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.values()[i * n + j] * s.values()[i];
  auto an = a.node();
  auto sn = s.node();
  return Tensor(make_op({m, n}, std::move(out), {an, sn}, [an, sn, m, n](Node& self) {
    ensure_grad(*an);
    ensure_grad(*sn);
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        an->grad[i * n + j] += self.grad[i * n + j] * sn->value[i];
        acc += self.grad[i * n + j] * an->value[i * n + j];
      }
      sn->grad[i] += acc;
    }
  }));
}

Tensor layer_norm(const Tensor& a, double eps) {
  check_rank2(a, "layer_norm");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n), inv_std(m), mean(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = a.values().data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    mean[i] = mu;
    inv_std[i] = is;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (row[j] - mu) * is;
  }
  auto an = a.node();
  return Tensor(make_op({m, n}, std::move(out),
                        {an}, [an, m, n, inv_std](Node& self) {
    ensure_grad(*an);
    // dx = (g - mean(g) - y * mean(g .* y)) / std, per row
    for (std::size_t i = 0; i < m; ++i) {
      const double* g = self.grad.data() + i * n;
      const double* y = self.value.data() + i * n;
      double gmu = 0.0, gymu = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        gmu += g[j];
        gymu += g[j] * y[j];
      }
      gmu /= static_cast<double>(n);
      gymu /= static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j)
        an->grad[i * n + j] += (g[j] - gmu - y[j] * gymu) * inv_std[i];
    }
  }));
}

// ---- structure -----------------------------------------------------------------

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  check_rank2(a, "concat_cols");
  check_rank2(b, "concat_cols");
  if (a.rows() != b.rows())
    throw shape_error("concat_cols: row counts disagree, " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  const std::size_t m = a.rows(), ca = a.cols(), cb = b.cols(), n = ca + cb;
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(a.values().data() + i * ca, ca, out.data() + i * n);
    std::copy_n(b.values().data() + i * cb, cb, out.data() + i * n + ca);
  }
  auto an = a.node();
  auto bn = b.node();
  return Tensor(make_op({m, n}, std::move(out), {an, bn}, [an, bn, m, ca, cb, n](Node& self) {
    ensure_grad(*an);
    ensure_grad(*bn);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < ca; ++j) an->grad[i * ca + j] += self.grad[i * n + j];
      for (std::size_t j = 0; j < cb; ++j) bn->grad[i * cb + j] += self.grad[i * n + ca + j];
    }
  }));
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  check_rank2(a, "slice_cols");
  if (c0 >= c1 || c1 > a.cols())
    throw shape_error("slice_cols: bad column range [" + std::to_string(c0) + "," +
                      std::to_string(c1) + ") for " + shape_str(a.shape()));
  const std::size_t m = a.rows(), n = a.cols(), w = c1 - c0;
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(a.values().data() + i * n + c0, w, out.data() + i * w);
  auto an = a.node();
  return Tensor(make_op({m, w}, std::move(out), {an}, [an, m, n, w, c0](Node& self) {
    ensure_grad(*an);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) an->grad[i * n + c0 + j] += self.grad[i * w + j];
  }));
}

Tensor gather_rows(const Tensor& table, std::span<const int> index) {
  check_rank2(table, "gather_rows");
  const std::size_t m = index.size(), n = table.cols(), rows = table.rows();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    if (index[i] < 0 || static_cast<std::size_t>(index[i]) >= rows)
      throw contract_error("gather_rows: index " + std::to_string(index[i]) +
                           " out of range for table with " + std::to_string(rows) + " rows");
    std::copy_n(table.values().data() + static_cast<std::size_t>(index[i]) * n, n,
                out.data() + i * n);
  }
  auto tn = table.node();
  std::vector<int> idx(index.begin(), index.end());
  return Tensor(make_op({m, n}, std::move(out), {tn}, [tn, idx, m, n](Node& self) {
    ensure_grad(*tn);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        tn->grad[static_cast<std::size_t>(idx[i]) * n + j] += self.grad[i * n + j];
  }));
}

// ---- backward --------------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined()) throw contract_error("backward: undefined tensor");
  if (loss.numel() != 1)
    throw contract_error("backward: loss must be scalar, got shape " + shape_str(loss.shape()));

  // Post-order over the parent DAG: a node is emitted after all of its
  // parents, so the reversed list visits every consumer before its inputs.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next;
  };
  std::vector<Frame> stack;
  Node* root = loss.node().get();
  if (visited.insert(root).second) stack.push_back({root, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      Node* p = f.node->parents[f.next++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  ensure_grad(*root);
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->grad.size() == n->value.size()) n->backprop();
  }
}

}  // namespace sfd
