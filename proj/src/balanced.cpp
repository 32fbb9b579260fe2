#include "fixedrank/balanced.hpp"

#include <cmath>
#include <sstream>

#include "fixedrank/errors.hpp"
#include "fixedrank/kernels.hpp"

namespace fixedrank::balanced {

using kernels::sym;
using kernels::sylvester_solve;

namespace {

constexpr double kMaxGramCondition = 1e12;
constexpr double kHorizontalTol = 1e-8;
constexpr double kTangencyTol = 1e-8;

// Inverse of an SPD Gram matrix; rejects factors that are not safely full rank.
Matrix checked_gram_inverse(const Matrix& gram, double rank_tol, const char* which) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > rank_tol * rank_tol * hi) || !(lo * kMaxGramCondition >= hi)) {
    std::ostringstream os;
    os << "factor " << which << " is rank deficient or ill conditioned (Gram eigenvalues "
       << lo << " .. " << hi << ")";
    throw RankError(os.str());
  }
  Eigen::LLT<Matrix> llt(gram);
  return llt.solve(Matrix::Identity(gram.rows(), gram.cols()));
}

void require_attached(const Point& pt, const LiftPair& a, const char* what) {
  if (!a.base.same_as(pt)) {
    throw ContractError(std::string(what) + ": lift is attached to a different base point");
  }
}

void require_shape(const Point& pt, const FactorPair& a, const char* what) {
  if (a.m.rows() != pt.rows_m() || a.m.cols() != pt.rank() || a.n.rows() != pt.rows_n() ||
      a.n.cols() != pt.rank()) {
    throw DimensionError(std::string(what) + ": direction does not match the point's shape");
  }
}

void require_horizontal(const Point& pt, const FactorPair& a, const char* what) {
  const double r = relative_horizontality_residual(pt, a);
  if (!(r <= kHorizontalTol)) {
    std::ostringstream os;
    os << what << ": input is not horizontal (relative residual " << r << ")";
    throw ContractError(os.str());
  }
}

void require_tangent(const Point& pt, const Matrix& z) {
  if (z.rows() != pt.rows_m() || z.cols() != pt.rows_n()) {
    throw DimensionError("horizontal lift: z must be m x n");
  }
  const double defect = tangency_defect(pt, z);
  if (!(defect <= kTangencyTol)) {
    std::ostringstream os;
    os << "z is not tangent to the rank-" << pt.rank() << " manifold (defect " << defect << ")";
    throw TangencyError(os.str());
  }
}

// Lift from the three products that define it: zN, zᵀM and MᵀzN.
LiftSolution lift_from_products(const Point& pt, const Matrix& zn, const Matrix& ztm,
                                const Matrix& mtzn) {
  const Matrix w = pt.gram_m() * pt.gram_n();
  Matrix k = sylvester_solve(w, w, mtzn);
  FactorPair dir;
  dir.m = (zn - pt.m() * (pt.gram_n() * k)) * pt.gram_n_inv();
  dir.n = (ztm - pt.n() * (pt.gram_m() * k.transpose())) * pt.gram_m_inv();
  return {LiftPair{pt, std::move(dir), true}, std::move(k)};
}

Matrix inverse_transpose(const Matrix& r) {
  Eigen::JacobiSVD<Matrix> svd(r);
  const auto& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0) || !(smax / smin <= 1e12)) {
    std::ostringstream os;
    os << "gauge transform is singular or ill conditioned (condition " << smax / smin << ")";
    throw GaugeError(os.str());
  }
  return r.partialPivLu().inverse().transpose();
}

}  // namespace

Point::Point(Matrix m, Matrix n, double rank_tol) {
  if (m.cols() != n.cols() || m.cols() == 0) {
    throw DimensionError("balanced point: factors must have the same positive number of columns");
  }
  if (m.rows() < m.cols() || n.rows() < n.cols()) {
    throw RankError("balanced point: a factor has fewer rows than columns");
  }
  if (!m.allFinite() || !n.allFinite()) {
    throw DimensionError("balanced point: non-finite entries");
  }
  auto d = std::make_shared<Data>();
  d->gram_m = m.transpose() * m;
  d->gram_n = n.transpose() * n;
  d->gram_m_inv = checked_gram_inverse(d->gram_m, rank_tol, "M");
  d->gram_n_inv = checked_gram_inverse(d->gram_n, rank_tol, "N");
  d->factors = {std::move(m), std::move(n)};
  d->rank_tol = rank_tol;
  d_ = std::move(d);
}

bool Point::same_as(const Point& other) const {
  if (d_ == other.d_) return true;
  return m().rows() == other.m().rows() && n().rows() == other.n().rows() &&
         rank() == other.rank() && m() == other.m() && n() == other.n();
}

LiftPair make_lift(const Point& base, FactorPair dir, bool horizontal) {
  require_shape(base, dir, "make_lift");
  if (horizontal) require_horizontal(base, dir, "make_lift");
  return {base, std::move(dir), horizontal};
}

double metric(const Point& pt, const FactorPair& a, const FactorPair& b) {
  return (pt.gram_m_inv() * (a.m.transpose() * b.m)).trace() +
         (pt.gram_n_inv() * (a.n.transpose() * b.n)).trace();
}

double metric(const Point& pt, const LiftPair& a, const LiftPair& b) {
  require_attached(pt, a, "metric");
  require_attached(pt, b, "metric");
  return metric(pt, a.dir, b.dir);
}

double euclidean_metric(const LiftPair& a, const LiftPair& b) {
  if (!a.base.same_as(b.base)) {
    throw ContractError("euclidean_metric: lifts attached to different points");
  }
  return trace_inner(a.dir, b.dir);
}

LiftPair vertical_vector(const Point& pt, const FiberDirection& d) {
  if (d.rdot.rows() != pt.rank() || d.rdot.cols() != pt.rank()) {
    throw DimensionError("vertical_vector: Rdot must be p x p");
  }
  return {pt, {pt.m() * d.rdot, -pt.n() * d.rdot.transpose()}, false};
}

double horizontality_residual(const Point& pt, const FactorPair& a) {
  const Matrix lhs = (pt.m().transpose() * a.m) * pt.gram_m_inv();
  const Matrix rhs = pt.gram_n_inv() * (a.n.transpose() * pt.n());
  return (lhs - rhs).norm();
}

double horizontality_residual(const Point& pt, const LiftPair& a) {
  require_attached(pt, a, "horizontality_residual");
  return horizontality_residual(pt, a.dir);
}

double relative_horizontality_residual(const Point& pt, const FactorPair& a) {
  const Matrix lhs = (pt.m().transpose() * a.m) * pt.gram_m_inv();
  const Matrix rhs = pt.gram_n_inv() * (a.n.transpose() * pt.n());
  // Bound on the size of either term, so the ratio stays meaningful when
  // MᵀẊ_M and ẊₙᵀN nearly vanish (e.g. gradients at critical points).
  const double scale = pt.m().norm() * a.m.norm() * pt.gram_m_inv().norm() +
                       pt.n().norm() * a.n.norm() * pt.gram_n_inv().norm();
  if (scale == 0.0) return 0.0;
  return (lhs - rhs).norm() / scale;
}

Matrix dpi(const Point& pt, const FactorPair& a) {
  require_shape(pt, a, "dpi");
  return a.m * pt.n().transpose() + pt.m() * a.n.transpose();
}

Matrix dpi(const Point& pt, const LiftPair& a) {
  require_attached(pt, a, "dpi");
  return dpi(pt, a.dir);
}

double tangency_defect(const Point& pt, const Matrix& z) {
  const double zn = z.norm();
  if (zn == 0.0) return 0.0;
  // (I − P_M) z (I − P_N) = z − P_M z − z P_N + P_M z P_N
  const Matrix pm_z = pt.m() * (pt.gram_m_inv() * (pt.m().transpose() * z));
  const Matrix r = z - pm_z;
  const Matrix r_pn = (r * pt.n()) * pt.gram_n_inv() * pt.n().transpose();
  return (r - r_pn).norm() / zn;
}

LiftSolution horizontal_lift(const Point& pt, const Matrix& z) {
  require_tangent(pt, z);
  const Matrix zn = z * pt.n();
  const Matrix ztm = z.transpose() * pt.m();
  const Matrix mtzn = pt.m().transpose() * zn;
  return lift_from_products(pt, zn, ztm, mtzn);
}

LiftSolution horizontal_lift_factored(const Point& pt, const Matrix& u, const Matrix& v) {
  require_shape(pt, {u, v}, "horizontal_lift_factored");
  const Matrix vtn = v.transpose() * pt.n();
  const Matrix mtu = pt.m().transpose() * u;
  const Matrix zn = u * pt.gram_n() + pt.m() * vtn;
  const Matrix ztm = pt.n() * mtu.transpose() + v * pt.gram_m();
  const Matrix mtzn = mtu * pt.gram_n() + pt.gram_m() * vtn;
  return lift_from_products(pt, zn, ztm, mtzn);
}

Point transport_point(const Point& pt, const GaugeTransform& g) {
  if (g.r.rows() != pt.rank() || g.r.cols() != pt.rank()) {
    throw DimensionError("gauge transform must be p x p");
  }
  return Point(pt.m() * g.r, pt.n() * inverse_transpose(g.r), pt.rank_tol());
}

LiftPair fiber_transport(const LiftPair& lift, const GaugeTransform& g) {
  require_horizontal(lift.base, lift.dir, "fiber_transport");
  const Point moved = transport_point(lift.base, g);
  const Matrix rit = inverse_transpose(g.r);
  return {moved, {lift.dir.m * g.r, lift.dir.n * rit}, true};
}

LiftPair fiber_transport(const LiftSolution& sol, const GaugeTransform& g) {
  return fiber_transport(sol.lift, g);
}

ProjectionSolution horizontal_project(const Point& pt, const FactorPair& a) {
  require_shape(pt, a, "horizontal_project");
  const Matrix& gm = pt.gram_m();
  const Matrix& gn = pt.gram_n();
  const Matrix w = gn * gm;
  const Matrix rhs = -gn * (pt.m().transpose() * a.m) + (a.n.transpose() * pt.n()) * gm;
  Matrix rdot = sylvester_solve(w, w, rhs);
  FactorPair out{a.m + pt.m() * rdot, a.n - pt.n() * rdot.transpose()};
  return {LiftPair{pt, std::move(out), true}, std::move(rdot)};
}

ProjectionSolution horizontal_project(const Point& pt, const LiftPair& a) {
  require_attached(pt, a, "horizontal_project");
  return horizontal_project(pt, a.dir);
}

FactorPair connection_total(const Point& pt, const FactorPair& x, const FactorPair& y,
                            const FactorPair& dy) {
  const Matrix& m = pt.m();
  const Matrix& n = pt.n();
  const Matrix& gmi = pt.gram_m_inv();
  const Matrix& gni = pt.gram_n_inv();
  FactorPair out;
  out.m = dy.m - y.m * (gmi * sym(x.m.transpose() * m)) - x.m * (gmi * sym(y.m.transpose() * m)) +
          m * (gmi * sym(x.m.transpose() * y.m));
  out.n = dy.n - y.n * (gni * sym(x.n.transpose() * n)) - x.n * (gni * sym(y.n.transpose() * n)) +
          n * (gni * sym(x.n.transpose() * y.n));
  return out;
}

LiftPair connection_total(const Point& pt, const LiftPair& x, const VectorField& y) {
  require_attached(pt, x, "connection_total");
  const FactorPair yv = y.value(pt.factors());
  const FactorPair dy = y.derivative(pt.factors(), x.dir);
  require_shape(pt, yv, "connection_total(field value)");
  require_shape(pt, dy, "connection_total(field derivative)");
  return {pt, connection_total(pt, x.dir, yv, dy), false};
}

LiftPair connection_quotient(const Point& pt, const LiftPair& x, const VectorField& y) {
  require_attached(pt, x, "connection_quotient");
  require_horizontal(pt, x.dir, "connection_quotient(direction)");
  const FactorPair yv = y.value(pt.factors());
  require_shape(pt, yv, "connection_quotient(field value)");
  require_horizontal(pt, yv, "connection_quotient(field value)");
  const FactorPair dy = y.derivative(pt.factors(), x.dir);
  require_shape(pt, dy, "connection_quotient(field derivative)");
  return horizontal_project(pt, connection_total(pt, x.dir, yv, dy)).lift;
}

LiftPair lifted_gradient(const Point& pt, const EuclideanOracle& oracle) {
  if (oracle.rows() != pt.rows_m() || oracle.cols() != pt.rows_n()) {
    throw DimensionError("lifted_gradient: oracle and point dimensions differ");
  }
  FactorPair g;
  g.m = oracle.grad_right(pt.factors(), pt.n()) * pt.gram_m();
  g.n = oracle.grad_left(pt.factors(), pt.m()) * pt.gram_n();
  return {pt, std::move(g), true};
}

LiftPair euclidean_horizontal_lift(const Point& pt, const Matrix& z) {
  require_tangent(pt, z);
  const Matrix zn = z * pt.n();
  const Matrix ztm = z.transpose() * pt.m();
  const Matrix k = sylvester_solve(pt.gram_m(), pt.gram_n(), pt.m().transpose() * zn);
  FactorPair dir;
  dir.m = (zn - pt.m() * k) * pt.gram_n_inv();
  dir.n = (ztm - pt.n() * k.transpose()) * pt.gram_m_inv();
  // Horizontal for the Euclidean metric, not for ḡ: no certificate.
  return {pt, std::move(dir), false};
}

Point retract(const Point& pt, const LiftPair& h) {
  require_attached(pt, h, "retract");
  require_horizontal(pt, h.dir, "retract");
  Matrix m = pt.m() + h.dir.m;
  Matrix n = pt.n() + h.dir.n;
  // A factor that collapses relative to its previous size has lost rank even
  // if it is well conditioned on its own (p = 1).
  const double tol2 = pt.rank_tol() * pt.rank_tol();
  auto collapsed = [tol2](const Matrix& now, const Matrix& gram_before) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(now.transpose() * now, Eigen::EigenvaluesOnly);
    return !(eig.eigenvalues().minCoeff() > tol2 * gram_before.trace());
  };
  if (collapsed(m, pt.gram_m()) || collapsed(n, pt.gram_n())) {
    throw RankError("retract: a factor lost rank along the step");
  }
  return Point(std::move(m), std::move(n), pt.rank_tol());
}

}  // namespace fixedrank::balanced
