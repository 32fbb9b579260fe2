#pragma once

// Small dense kernels shared by both factor geometries. All functions are
// pure and reentrant.

#include "fixedrank/types.hpp"

namespace fixedrank::kernels {

/// ½(Z + Zᵀ).
Matrix sym(const Matrix& z);

/// ½(Z − Zᵀ).
Matrix skew(const Matrix& z);

/// Solves A·K + K·B = C for square A, B, C of equal size through the
/// vectorized system (I⊗A + Bᵀ⊗I)·vec(K) = vec(C).
///
/// Throws SylvesterError when the system is numerically singular, i.e.
/// when A and −B (nearly) share an eigenvalue.
Matrix sylvester_solve(const Matrix& a, const Matrix& b, const Matrix& c);

/// Matrix exponential by scaling and squaring with a Padé kernel.
Matrix matrix_exp(const Matrix& z);

struct QrFactors {
  Matrix q;  // m×p, orthonormal columns
  Matrix r;  // p×p, upper triangular, positive diagonal
};

/// Thin QR of a full-column-rank m×p matrix (m ≥ p), normalized so that
/// diag(R) > 0. This normalization makes the factorization unique.
/// Throws RankError if min |R_ii| < 1e-12·‖M‖.
QrFactors qr_positive(const Matrix& m);

}  // namespace fixedrank::kernels
