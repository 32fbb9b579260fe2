#pragma once

// Quotient geometry of the rank-p manifold built on pairs of full-rank
// factors (M, N) ↦ M·Nᵀ, with the Gram-scaled metric
//
//   ḡ((Ṁ,Ṅ),(M̃,Ñ)) = tr((MᵀM)⁻¹ṀᵀM̃ + (NᵀN)⁻¹ṄᵀÑ).
//
// The fibers are the GL(p) orbits (M·R, N·R⁻ᵀ). This metric is invariant
// along fibers, so horizontal lifts carry a well-defined metric on the
// quotient.

#include <memory>

#include "fixedrank/oracle.hpp"
#include "fixedrank/types.hpp"

namespace fixedrank::balanced {

/// A point of the total space: a pair of full-rank factors. Gram matrices
/// and their Cholesky factorizations are computed once at construction;
/// copies share them.
class Point {
 public:
  /// Throws RankError if either factor is numerically rank deficient
  /// relative to rank_tol, or if a Gram matrix has condition > 1e12.
  Point(Matrix m, Matrix n, double rank_tol = 1e-10);
  explicit Point(FactorPair factors, double rank_tol = 1e-10)
      : Point(std::move(factors.m), std::move(factors.n), rank_tol) {}

  const Matrix& m() const { return d_->factors.m; }
  const Matrix& n() const { return d_->factors.n; }
  const FactorPair& factors() const { return d_->factors; }
  Eigen::Index rows_m() const { return m().rows(); }
  Eigen::Index rows_n() const { return n().rows(); }
  Eigen::Index rank() const { return m().cols(); }
  double rank_tol() const { return d_->rank_tol; }

  const Matrix& gram_m() const { return d_->gram_m; }
  const Matrix& gram_n() const { return d_->gram_n; }
  const Matrix& gram_m_inv() const { return d_->gram_m_inv; }
  const Matrix& gram_n_inv() const { return d_->gram_n_inv; }

  Matrix product() const { return m() * n().transpose(); }

  /// Same underlying data (cheap identity) or equal factors.
  bool same_as(const Point& other) const;

 private:
  struct Data {
    FactorPair factors;
    double rank_tol;
    Matrix gram_m, gram_n;
    Matrix gram_m_inv, gram_n_inv;
  };
  std::shared_ptr<const Data> d_;
};

/// An ambient tangent direction (Ẋ_M, Ẋ_N) at a point. `horizontal` is a
/// certificate: it is only set by operations that produce horizontal
/// vectors, and it is re-checked whenever an operation requires it.
struct LiftPair {
  Point base;
  FactorPair dir;
  bool horizontal = false;

  const Matrix& xm() const { return dir.m; }
  const Matrix& xn() const { return dir.n; }
};

/// Builds a lift at `base`. Dimensions are checked; if `horizontal` is
/// claimed, the claim is verified (ContractError otherwise).
LiftPair make_lift(const Point& base, FactorPair dir, bool horizontal = false);

/// A horizontal lift together with the solution K of its Sylvester system.
struct LiftSolution {
  LiftPair lift;
  Matrix k;
};

/// Ṙ ∈ ℝ^{p×p}, a direction along the fiber.
struct FiberDirection {
  Matrix rdot;
};

/// R ∈ GL(p).
struct GaugeTransform {
  Matrix r;
};

/// Result of the horizontal projection: the projected lift and the Ṙ with
/// projected = input + vertical_vector(Ṙ).
struct ProjectionSolution {
  LiftPair lift;
  Matrix rdot;
};

double metric(const Point& pt, const LiftPair& a, const LiftPair& b);
/// Same metric on raw pairs attached to pt (no base checks).
double metric(const Point& pt, const FactorPair& a, const FactorPair& b);

/// The plain Euclidean trace metric on the factor space. It is not
/// invariant along fibers; kept to exhibit that failure.
double euclidean_metric(const LiftPair& a, const LiftPair& b);

/// (M·Ṙ, −N·Ṙᵀ).
LiftPair vertical_vector(const Point& pt, const FiberDirection& d);

/// ‖Mᵀaₘ(MᵀM)⁻¹ − (NᵀN)⁻¹aₙᵀN‖_F; zero iff a is horizontal.
double horizontality_residual(const Point& pt, const FactorPair& a);
double horizontality_residual(const Point& pt, const LiftPair& a);
/// The residual divided by ‖M‖‖aₘ‖‖(MᵀM)⁻¹‖ + ‖N‖‖aₙ‖‖(NᵀN)⁻¹‖, a bound on
/// the size of either term.
double relative_horizontality_residual(const Point& pt, const FactorPair& a);

/// Dπ(M,N)[a] = aₘNᵀ + M·aₙᵀ.
Matrix dpi(const Point& pt, const LiftPair& a);
Matrix dpi(const Point& pt, const FactorPair& a);

/// ‖(I−P_M)·z·(I−P_N)‖_F / ‖z‖_F with P_M, P_N the orthogonal projectors
/// onto span(M), span(N). Zero iff z is tangent to the rank-p manifold at
/// M·Nᵀ.
double tangency_defect(const Point& pt, const Matrix& z);

/// Horizontal lift of a tangent vector z at M·Nᵀ. Throws TangencyError if
/// tangency_defect(pt, z) > 1e-8.
LiftSolution horizontal_lift(const Point& pt, const Matrix& z);

/// Horizontal lift of the tangent vector z = U·Nᵀ + M·Vᵀ, given in factored
/// form (every tangent vector at M·Nᵀ has this form). Costs
/// O(p²(m+n+p)) and never forms z.
LiftSolution horizontal_lift_factored(const Point& pt, const Matrix& u, const Matrix& v);

/// The representative (M·R, N·R⁻ᵀ) of the same fiber.
Point transport_point(const Point& pt, const GaugeTransform& g);

/// Moves a horizontal lift along the fiber: (Ẋ_M·R, Ẋ_N·R⁻ᵀ) at
/// (M·R, N·R⁻ᵀ). Throws GaugeError if cond(R) > 1e12.
LiftPair fiber_transport(const LiftPair& lift, const GaugeTransform& g);
LiftPair fiber_transport(const LiftSolution& sol, const GaugeTransform& g);

/// Projection onto the horizontal space along the vertical space.
ProjectionSolution horizontal_project(const Point& pt, const LiftPair& a);
ProjectionSolution horizontal_project(const Point& pt, const FactorPair& a);

/// Levi-Civita connection of the Gram-scaled metric on the total space,
/// ∇̄ₓy, given the field value y and its directional derivative ∂ₓy at pt.
FactorPair connection_total(const Point& pt, const FactorPair& x, const FactorPair& y,
                            const FactorPair& dy);
LiftPair connection_total(const Point& pt, const LiftPair& x, const VectorField& y);

/// Horizontal lift of the quotient connection: Pʰ(∇̄ₓy). Both x and the
/// field's value at pt must be horizontal.
LiftPair connection_quotient(const Point& pt, const LiftPair& x, const VectorField& y);

/// Gradient of f̄ = f∘π for the Gram-scaled metric:
/// (G·N·MᵀM, Gᵀ·M·NᵀN). Always horizontal.
LiftPair lifted_gradient(const Point& pt, const EuclideanOracle& oracle);

/// Horizontal lift for the plain Euclidean metric on the factor space:
/// Ẋ_M = (zN − MK)(NᵀN)⁻¹, Ẋ_N = (zᵀM − NKᵀ)(MᵀM)⁻¹ with
/// MᵀM·K + K·NᵀN = MᵀzN.
LiftPair euclidean_horizontal_lift(const Point& pt, const Matrix& z);

/// (M + Ẋ_M, N + Ẋ_N). Throws RankError if a factor loses rank.
Point retract(const Point& pt, const LiftPair& h);

}  // namespace fixedrank::balanced
