#include "sfd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sfd/error.hpp"

namespace sfd {
namespace {

double offdiag_frobenius(const std::vector<double>& a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) s += a[i * n + j] * a[i * n + j];
  return std::sqrt(s);
}

}  // namespace

EigResult sym_eig(const Tensor& m) {
  if (m.rank() != 2 || m.rows() != m.cols())
    throw contract_error("sym_eig: matrix must be square");
  const std::size_t n = m.rows();
  const auto mv = m.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(mv[i * n + j] - mv[j * n + i]) > 1e-9)
        throw contract_error("sym_eig: matrix is not symmetric within 1e-9");

  // Work on the symmetrized copy.
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = 0.5 * (mv[i * n + j] + mv[j * n + i]);
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  constexpr double kOffTol = 1e-12;
  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  while (offdiag_frobenius(a, n) >= kOffTol) {
    if (++sweep > kMaxSweeps)
      throw contract_error("sym_eig: Jacobi iteration failed to converge");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        // Rotation angle from the classic stable formula.
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J applied in place on rows/columns p and q.
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  // Sort eigenpairs by descending eigenvalue.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t i, std::size_t j) { return a[i * n + i] > a[j * n + j]; });
  std::vector<double> ev(n), vec(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    ev[k] = a[perm[k] * n + perm[k]];
    for (std::size_t i = 0; i < n; ++i) vec[i * n + k] = v[i * n + perm[k]];
  }
  return {Tensor::from({n}, std::move(ev)), Tensor::from({n, n}, std::move(vec))};
}

Tensor sqrtm_psd(const Tensor& m) {
  auto eig = sym_eig(m);
  const std::size_t n = m.rows();
  std::vector<double> root(n);
  for (std::size_t k = 0; k < n; ++k) {
    double lambda = eig.eigenvalues.at(k);
    if (lambda < -1e-8)
      throw not_psd_error("sqrtm_psd: eigenvalue " + std::to_string(lambda) +
                          " below PSD tolerance");
    if (lambda < 1e-10) lambda = 0.0;
    root[k] = std::sqrt(lambda);
  }
  // V diag(sqrt(lambda)) V^T, symmetrized against rounding.
  const auto V = eig.eigenvectors.values();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += V[i * n + k] * root[k] * V[j * n + k];
      out[i * n + j] = acc;
      out[j * n + i] = acc;
    }
  return Tensor::from({n, n}, std::move(out));
}

}  // namespace sfd
