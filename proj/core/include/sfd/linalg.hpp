#pragma once

#include <utility>

#include "sfd/tensor.hpp"

namespace sfd {

struct EigResult {
  Tensor eigenvalues;   // {n}, descending
  Tensor eigenvectors;  // (n, n), column k pairs with eigenvalue k
};

// Symmetric eigendecomposition by cyclic Jacobi rotations.  The input must be
// square and symmetric within 1e-9 (contract_error otherwise); it is
// symmetrized before sweeping.  Iterates until the off-diagonal Frobenius
// norm drops below 1e-12.  Not differentiable.
EigResult sym_eig(const Tensor& m);

// Principal square root of a symmetric PSD matrix via sym_eig.  Eigenvalues
// below -1e-8 raise not_psd_error; eigenvalues below 1e-10 are clamped to 0.
Tensor sqrtm_psd(const Tensor& m);

}  // namespace sfd
