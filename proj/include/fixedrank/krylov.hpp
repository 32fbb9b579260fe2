#pragma once

// Restart-free GMRES on factor-pair vectors with a caller-supplied inner
// product (the geometry's metric at the current point).

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fixedrank/types.hpp"

namespace fixedrank {

using LinearOperator = std::function<FactorPair(const FactorPair&)>;
using InnerProduct = std::function<double(const FactorPair&, const FactorPair&)>;

struct KrylovResult {
  FactorPair solution;
  int iterations = 0;
  /// ‖op(x) − b‖ / ‖b‖ in the supplied norm, recomputed from the returned x.
  double relative_residual = 0.0;
  bool converged = false;
};

/// Solves op(x) = rhs to relative residual `tol` with at most `max_iter`
/// Arnoldi steps. The returned x lies in the Krylov space of rhs, so it
/// inherits any linear constraint that op preserves (horizontality).
/// On failure the best iterate is returned with converged = false.
inline KrylovResult krylov_solve(const LinearOperator& op, const FactorPair& rhs,
                                 const InnerProduct& inner, double tol, int max_iter) {
  KrylovResult out;
  max_iter = std::max(max_iter, 1);
  out.solution = 0.0 * rhs;
  const double beta = std::sqrt(std::max(0.0, inner(rhs, rhs)));
  if (beta == 0.0) {
    out.converged = true;
    return out;
  }

  std::vector<FactorPair> basis;
  basis.reserve(static_cast<std::size_t>(max_iter) + 1);
  basis.push_back((1.0 / beta) * rhs);

  Matrix h = Matrix::Zero(max_iter + 1, max_iter);
  Vector cs = Vector::Zero(max_iter);
  Vector sn = Vector::Zero(max_iter);
  Vector g = Vector::Zero(max_iter + 1);
  g(0) = beta;

  int k = 0;
  while (k < max_iter) {
    FactorPair w = op(basis[k]);
    // Modified Gram-Schmidt, applied twice.
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i <= k; ++i) {
        const double c = inner(basis[i], w);
        h(i, k) += c;
        w -= c * basis[i];
      }
    }
    const double wn = std::sqrt(std::max(0.0, inner(w, w)));
    h(k + 1, k) = wn;

    for (int i = 0; i < k; ++i) {
      const double t = cs(i) * h(i, k) + sn(i) * h(i + 1, k);
      h(i + 1, k) = -sn(i) * h(i, k) + cs(i) * h(i + 1, k);
      h(i, k) = t;
    }
    const double r = std::hypot(h(k, k), h(k + 1, k));
    cs(k) = r == 0.0 ? 1.0 : h(k, k) / r;
    sn(k) = r == 0.0 ? 0.0 : h(k + 1, k) / r;
    h(k, k) = r;
    h(k + 1, k) = 0.0;
    g(k + 1) = -sn(k) * g(k);
    g(k) = cs(k) * g(k);
    ++k;

    if (std::abs(g(k)) <= tol * beta) break;
    if (wn <= 1e-14 * beta) break;  // invariant subspace found
    basis.push_back((1.0 / wn) * w);
  }

  // Back substitution on the k×k triangular system.
  Vector y = Vector::Zero(k);
  for (int i = k - 1; i >= 0; --i) {
    double acc = g(i);
    for (int j = i + 1; j < k; ++j) acc -= h(i, j) * y(j);
    y(i) = h(i, i) == 0.0 ? 0.0 : acc / h(i, i);
  }
  for (int i = 0; i < k; ++i) out.solution += y(i) * basis[i];

  const FactorPair res = op(out.solution) - rhs;
  out.relative_residual = std::sqrt(std::max(0.0, inner(res, res))) / beta;
  out.iterations = k;
  // The recurrence estimate drives the loop; the recomputed residual may
  // exceed it by rounding.
  out.converged = std::abs(g(k)) <= tol * beta && out.relative_residual <= 10.0 * tol;
  return out;
}

}  // namespace fixedrank
