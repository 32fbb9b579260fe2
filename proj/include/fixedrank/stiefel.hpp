#pragma once

// Quotient geometry of the rank-p manifold built on St(p,m) × ℝ*^{n×p}:
// X = M·Nᵀ with MᵀM = I. The total space is a Riemannian submanifold of
// the Euclidean factor space, the fibers are the O(p) orbits (M·R, N·R),
// and the Riemannian exponential has a closed form.

#include <memory>

#include "fixedrank/oracle.hpp"
#include "fixedrank/types.hpp"

namespace fixedrank::stiefel {

class Point {
 public:
  /// Throws ContractError if ‖MᵀM − I‖_F > orth_tol and RankError if N is
  /// numerically rank deficient (σ_min ≤ 1e-10·σ_max or cond(NᵀN) > 1e12).
  Point(Matrix m, Matrix n, double orth_tol = 1e-10);
  explicit Point(FactorPair factors, double orth_tol = 1e-10)
      : Point(std::move(factors.m), std::move(factors.n), orth_tol) {}

  const Matrix& m() const { return d_->factors.m; }
  const Matrix& n() const { return d_->factors.n; }
  const FactorPair& factors() const { return d_->factors; }
  Eigen::Index rows_m() const { return m().rows(); }
  Eigen::Index rows_n() const { return n().rows(); }
  Eigen::Index rank() const { return m().cols(); }
  double orth_tol() const { return d_->orth_tol; }

  const Matrix& gram_n() const { return d_->gram_n; }
  const Matrix& gram_n_inv() const { return d_->gram_n_inv; }
  /// NᵀN + I, the coefficient of every Sylvester system of this geometry.
  const Matrix& shifted_gram_n() const { return d_->shifted_gram_n; }

  Matrix product() const { return m() * n().transpose(); }
  bool same_as(const Point& other) const;

 private:
  struct Data {
    FactorPair factors;
    double orth_tol;
    Matrix gram_n, gram_n_inv, shifted_gram_n;
  };
  std::shared_ptr<const Data> d_;
};

/// A tangent vector (Ẋ_M, Ẋ_N) to the total space at `base`; Ẋ_M is tangent
/// to the Stiefel manifold. `horizontal` is a re-checked certificate.
struct LiftPair {
  Point base;
  FactorPair dir;
  bool horizontal = false;

  const Matrix& xm() const { return dir.m; }
  const Matrix& xn() const { return dir.n; }
};

/// Builds a lift, checking shape, Stiefel tangency of the M slot, and the
/// horizontal claim if made.
LiftPair make_lift(const Point& base, FactorPair dir, bool horizontal = false);

struct LiftSolution {
  LiftPair lift;
  Matrix omega;  // skew
  Matrix s;      // symmetric
};

/// R ∈ O(p).
struct GaugeRotation {
  Matrix r;
};

struct ProjectionSolution {
  LiftPair lift;
  Matrix omega;
};

/// ‖sym(Mᵀ·Ẋ_M)‖_F / ‖Ẋ_M‖_F (0 for a zero slot).
double stiefel_tangency_residual(const Point& pt, const Matrix& xm);
/// ‖skew(MᵀẊ_M + NᵀẊ_N)‖_F, zero for horizontal tangent vectors.
double horizontality_residual(const Point& pt, const FactorPair& a);
double horizontality_residual(const Point& pt, const LiftPair& a);
double relative_horizontality_residual(const Point& pt, const FactorPair& a);

/// P^{St×ℝ}: (Ṁ − M·sym(MᵀṀ), Ṅ).
LiftPair tangent_project_total(const Point& pt, const FactorPair& a);
FactorPair tangent_project_total_raw(const Point& pt, const FactorPair& a);

/// tr(aₘᵀbₘ + aₙᵀbₙ).
double metric(const Point& pt, const LiftPair& a, const LiftPair& b);
double metric(const Point& pt, const FactorPair& a, const FactorPair& b);

/// (M·Ω, N·Ω) for skew Ω.
LiftPair vertical_vector(const Point& pt, const Matrix& omega);

Matrix dpi(const Point& pt, const LiftPair& a);
Matrix dpi(const Point& pt, const FactorPair& a);

/// Same definition as in the balanced geometry, with P_M = M·Mᵀ.
double tangency_defect(const Point& pt, const Matrix& z);

/// Horizontal lift of a tangent vector z at M·Nᵀ:
///   Ω(NᵀN+I) + (NᵀN+I)Ω = MᵀzN − NᵀzᵀM,   S = MᵀzN − Ω(NᵀN+I),
///   Ẋ_M = (zN − M(Ω+S))(NᵀN)⁻¹,           Ẋ_N = zᵀM + NΩ.
LiftSolution horizontal_lift(const Point& pt, const Matrix& z);
/// Same, for z = U·Nᵀ + M·Vᵀ given in factored form.
LiftSolution horizontal_lift_factored(const Point& pt, const Matrix& u, const Matrix& v);

Point transport_point(const Point& pt, const GaugeRotation& g);
/// (Ẋ_M·R, Ẋ_N·R) at (M·R, N·R).
LiftPair fiber_transport(const LiftPair& lift, const GaugeRotation& g);
LiftPair fiber_transport(const LiftSolution& sol, const GaugeRotation& g);

/// Projection of a total-space tangent vector onto the horizontal space
/// along (M·Ω, N·Ω).
ProjectionSolution horizontal_project(const Point& pt, const LiftPair& a);
ProjectionSolution horizontal_project(const Point& pt, const FactorPair& a);

/// Levi-Civita connection of the total space: P^{St×ℝ}(∂ₓy).
FactorPair connection_total(const Point& pt, const FactorPair& dy);
LiftPair connection_total(const Point& pt, const LiftPair& x, const VectorField& y);
/// Pʰ(P^{St×ℝ}(∂ₓy)) for horizontal x and a horizontal-lift field y.
LiftPair connection_quotient(const Point& pt, const LiftPair& x, const VectorField& y);

/// P^{St×ℝ}(G·N, Gᵀ·M). Always horizontal.
LiftPair lifted_gradient(const Point& pt, const EuclideanOracle& oracle);

struct TotalExp {
  FactorPair factors;
  double orthonormality_drift;  // ‖MᵀM − I‖_F of the new M factor
};

/// Riemannian exponential of the total space (any tangent h):
///   M ↦ [M  Ẋ_M]·exp([[A, −S],[I, A]])·I_{2p,p}·exp(−A),  N ↦ N + Ẋ_N,
/// with A = MᵀẊ_M and S = Ẋ_MᵀẊ_M.
TotalExp exp_total(const Point& pt, const LiftPair& h);

/// exp_total(pt, t·h) for horizontal h, returned as a point. The M factor is
/// re-orthonormalized when its drift exceeds 1e-10. Throws RankError if
/// the N factor loses rank along the way.
Point exp_quotient(const Point& pt, const LiftPair& h, double t = 1.0);

/// M ← Q, N ← N·Rᵀ where M = Q·R is the QR factorization with positive
/// diag(R). Preserves M·Nᵀ.
Point reorthonormalize(const FactorPair& drifted, double orth_tol = 1e-10);

}  // namespace fixedrank::stiefel
