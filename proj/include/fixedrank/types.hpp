#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace fixedrank {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// An ordered pair of m×p and n×p matrices. Used both for factor pairs
/// (M, N) representing X = M·Nᵀ and for ambient tangent directions
/// (Ṁ, Ṅ) on the factor space.
struct FactorPair {
  Matrix m;
  Matrix n;

  static FactorPair zeros(Eigen::Index rows_m, Eigen::Index rows_n, Eigen::Index p) {
    return {Matrix::Zero(rows_m, p), Matrix::Zero(rows_n, p)};
  }

  Eigen::Index rank() const { return m.cols(); }

  FactorPair& operator+=(const FactorPair& o) {
    m += o.m;
    n += o.n;
    return *this;
  }
  FactorPair& operator-=(const FactorPair& o) {
    m -= o.m;
    n -= o.n;
    return *this;
  }
  FactorPair& operator*=(double s) {
    m *= s;
    n *= s;
    return *this;
  }
};

inline FactorPair operator+(FactorPair a, const FactorPair& b) { return a += b; }
inline FactorPair operator-(FactorPair a, const FactorPair& b) { return a -= b; }
inline FactorPair operator*(double s, FactorPair a) { return a *= s; }
inline FactorPair operator-(FactorPair a) { return a *= -1.0; }

/// Euclidean (trace) inner product on pairs.
inline double trace_inner(const FactorPair& a, const FactorPair& b) {
  return (a.m.array() * b.m.array()).sum() + (a.n.array() * b.n.array()).sum();
}

inline double frobenius(const FactorPair& a) {
  return std::sqrt(a.m.squaredNorm() + a.n.squaredNorm());
}

/// The represented matrix M·Nᵀ.
inline Matrix product(const FactorPair& f) { return f.m * f.n.transpose(); }

}  // namespace fixedrank
