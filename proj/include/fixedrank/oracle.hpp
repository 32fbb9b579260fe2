#pragma once

#include <functional>

#include "fixedrank/types.hpp"

namespace fixedrank {

/// A smooth objective f on m×n matrices, queried through the factors
/// (M, N) of X = M·Nᵀ. Products with the Euclidean gradient G = ∇f(X)
/// and with the Hessian action H[Ẋ] are exposed instead of dense
/// matrices so that sparse objectives never form an m×n intermediate.
///
/// Implementations are immutable after construction and reentrant.
class EuclideanOracle {
 public:
  virtual ~EuclideanOracle() = default;

  virtual Eigen::Index rows() const = 0;
  virtual Eigen::Index cols() const = 0;

  /// f(M·Nᵀ).
  virtual double value(const FactorPair& x) const = 0;
  /// G·V for V of size n×k.
  virtual Matrix grad_right(const FactorPair& x, const Matrix& v) const = 0;
  /// Gᵀ·U for U of size m×k.
  virtual Matrix grad_left(const FactorPair& x, const Matrix& u) const = 0;
  /// H[Ẋ]·V where Ẋ = Ṁ·Nᵀ + M·Ṅᵀ and dir = (Ṁ, Ṅ).
  virtual Matrix hess_right(const FactorPair& x, const FactorPair& dir, const Matrix& v) const = 0;
  /// H[Ẋ]ᵀ·U, same Ẋ as hess_right.
  virtual Matrix hess_left(const FactorPair& x, const FactorPair& dir, const Matrix& u) const = 0;
};

/// A tangent vector field on the factor space, given by its value and
/// its plain (Euclidean) directional derivative. Both maps accept any
/// factor pair, not only points of a particular total space, so that
/// finite differences can be taken freely.
struct VectorField {
  std::function<FactorPair(const FactorPair& at)> value;
  std::function<FactorPair(const FactorPair& at, const FactorPair& dir)> derivative;
};

/// A field that is constant in the ambient coordinates.
inline VectorField constant_field(FactorPair v) {
  VectorField f;
  f.value = [v](const FactorPair&) { return v; };
  f.derivative = [v](const FactorPair&, const FactorPair&) {
    return FactorPair::zeros(v.m.rows(), v.n.rows(), v.m.cols());
  };
  return f;
}

}  // namespace fixedrank
