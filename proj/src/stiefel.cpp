#include "fixedrank/stiefel.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "fixedrank/errors.hpp"
#include "fixedrank/kernels.hpp"

namespace fixedrank::stiefel {

using kernels::skew;
using kernels::sylvester_solve;
using kernels::sym;

namespace {

constexpr double kHorizontalTol = 1e-8;
constexpr double kTangentTol = 1e-8;
constexpr double kTangencyTol = 1e-8;
constexpr double kReorthTrigger = 1e-10;
constexpr double kDriftWarning = 1e-6;

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

void require_stiefel_tangent(const Point& pt, const Matrix& xm, const char* what) {
  const double r = stiefel_tangency_residual(pt, xm);
  if (!(r <= kTangentTol)) {
    std::ostringstream os;
    os << what << ": M slot is not tangent to the Stiefel manifold (residual " << r << ")";
    throw ContractError(os.str());
  }
}

void require_horizontal(const Point& pt, const FactorPair& a, const char* what) {
  require_stiefel_tangent(pt, a.m, what);
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

LiftSolution lift_from_products(const Point& pt, const Matrix& zn, const Matrix& ztm,
                                const Matrix& mtzn) {
  const Matrix& a = pt.shifted_gram_n();
  Matrix omega = sylvester_solve(a, a, mtzn - mtzn.transpose());
  Matrix s = mtzn - omega * a;
  FactorPair dir;
  dir.m = (zn - pt.m() * (omega + s)) * pt.gram_n_inv();
  dir.n = ztm + pt.n() * omega;
  return {LiftPair{pt, std::move(dir), true}, std::move(omega), std::move(s)};
}

void require_rotation(const Point& pt, const GaugeRotation& g) {
  if (g.r.rows() != pt.rank() || g.r.cols() != pt.rank()) {
    throw DimensionError("gauge rotation must be p x p");
  }
  const double defect = (g.r.transpose() * g.r - Matrix::Identity(pt.rank(), pt.rank())).norm();
  if (!(defect <= 1e-10)) {
    std::ostringstream os;
    os << "gauge rotation is not orthogonal (defect " << defect << ")";
    throw GaugeError(os.str());
  }
}

}  // namespace

Point::Point(Matrix m, Matrix n, double orth_tol) {
  const Eigen::Index p = m.cols();
  if (n.cols() != p || p == 0) {
    throw DimensionError("stiefel point: factors must have the same positive number of columns");
  }
  if (m.rows() < p || n.rows() < p) {
    throw RankError("stiefel point: a factor has fewer rows than columns");
  }
  if (!m.allFinite() || !n.allFinite()) {
    throw DimensionError("stiefel point: non-finite entries");
  }
  const double drift = (m.transpose() * m - Matrix::Identity(p, p)).norm();
  if (!(drift <= orth_tol)) {
    std::ostringstream os;
    os << "stiefel point: M is not orthonormal (drift " << drift << ")";
    throw ContractError(os.str());
  }
  auto d = std::make_shared<Data>();
  d->gram_n = n.transpose() * n;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(d->gram_n, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > 1e-20 * hi) || !(lo * 1e12 >= hi)) {
    std::ostringstream os;
    os << "stiefel point: factor N is rank deficient or ill conditioned (Gram eigenvalues " << lo
       << " .. " << hi << ")";
    throw RankError(os.str());
  }
  d->gram_n_inv = d->gram_n.llt().solve(Matrix::Identity(p, p));
  d->shifted_gram_n = d->gram_n + Matrix::Identity(p, p);
  d->factors = {std::move(m), std::move(n)};
  d->orth_tol = orth_tol;
  d_ = std::move(d);
}

bool Point::same_as(const Point& other) const {
  if (d_ == other.d_) return true;
  return m().rows() == other.m().rows() && n().rows() == other.n().rows() &&
         rank() == other.rank() && m() == other.m() && n() == other.n();
}

double stiefel_tangency_residual(const Point& pt, const Matrix& xm) {
  const double scale = xm.norm();
  if (scale == 0.0) return 0.0;
  return sym(pt.m().transpose() * xm).norm() / scale;
}

double horizontality_residual(const Point& pt, const FactorPair& a) {
  return skew(pt.m().transpose() * a.m + pt.n().transpose() * a.n).norm();
}

double horizontality_residual(const Point& pt, const LiftPair& a) {
  require_attached(pt, a, "horizontality_residual");
  return horizontality_residual(pt, a.dir);
}

double relative_horizontality_residual(const Point& pt, const FactorPair& a) {
  const Matrix mtx = pt.m().transpose() * a.m;
  const Matrix ntx = pt.n().transpose() * a.n;
  const double scale = pt.m().norm() * a.m.norm() + pt.n().norm() * a.n.norm();
  if (scale == 0.0) return 0.0;
  return skew(mtx + ntx).norm() / scale;
}

LiftPair make_lift(const Point& base, FactorPair dir, bool horizontal) {
  require_shape(base, dir, "make_lift");
  require_stiefel_tangent(base, dir.m, "make_lift");
  if (horizontal) require_horizontal(base, dir, "make_lift");
  return {base, std::move(dir), horizontal};
}

FactorPair tangent_project_total_raw(const Point& pt, const FactorPair& a) {
  return {a.m - pt.m() * sym(pt.m().transpose() * a.m), a.n};
}

LiftPair tangent_project_total(const Point& pt, const FactorPair& a) {
  require_shape(pt, a, "tangent_project_total");
  return {pt, tangent_project_total_raw(pt, a), false};
}

double metric(const Point&, const FactorPair& a, const FactorPair& b) { return trace_inner(a, b); }

double metric(const Point& pt, const LiftPair& a, const LiftPair& b) {
  require_attached(pt, a, "metric");
  require_attached(pt, b, "metric");
  return trace_inner(a.dir, b.dir);
}

LiftPair vertical_vector(const Point& pt, const Matrix& omega) {
  if (omega.rows() != pt.rank() || omega.cols() != pt.rank()) {
    throw DimensionError("vertical_vector: Omega must be p x p");
  }
  const double defect = (omega + omega.transpose()).norm();
  if (!(defect <= 1e-12 * std::max(1.0, omega.norm()))) {
    throw ContractError("vertical_vector: Omega is not skew-symmetric");
  }
  return {pt, {pt.m() * omega, pt.n() * omega}, false};
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
  const Matrix r = z - pt.m() * (pt.m().transpose() * z);
  const Matrix r_pn = (r * pt.n()) * pt.gram_n_inv() * pt.n().transpose();
  return (r - r_pn).norm() / zn;
}

LiftSolution horizontal_lift(const Point& pt, const Matrix& z) {
  require_tangent(pt, z);
  const Matrix zn = z * pt.n();
  const Matrix ztm = z.transpose() * pt.m();
  return lift_from_products(pt, zn, ztm, pt.m().transpose() * zn);
}

LiftSolution horizontal_lift_factored(const Point& pt, const Matrix& u, const Matrix& v) {
  require_shape(pt, {u, v}, "horizontal_lift_factored");
  const Matrix vtn = v.transpose() * pt.n();
  const Matrix mtu = pt.m().transpose() * u;
  // MᵀM = I is used in zᵀM and MᵀzN.
  const Matrix zn = u * pt.gram_n() + pt.m() * vtn;
  const Matrix ztm = pt.n() * mtu.transpose() + v;
  const Matrix mtzn = mtu * pt.gram_n() + vtn;
  return lift_from_products(pt, zn, ztm, mtzn);
}

Point transport_point(const Point& pt, const GaugeRotation& g) {
  require_rotation(pt, g);
  return Point(pt.m() * g.r, pt.n() * g.r, std::max(pt.orth_tol(), 1e-10));
}

LiftPair fiber_transport(const LiftPair& lift, const GaugeRotation& g) {
  require_horizontal(lift.base, lift.dir, "fiber_transport");
  const Point moved = transport_point(lift.base, g);
  return {moved, {lift.dir.m * g.r, lift.dir.n * g.r}, true};
}

LiftPair fiber_transport(const LiftSolution& sol, const GaugeRotation& g) {
  return fiber_transport(sol.lift, g);
}

ProjectionSolution horizontal_project(const Point& pt, const FactorPair& a) {
  require_shape(pt, a, "horizontal_project");
  const Matrix mta = pt.m().transpose() * a.m;
  const Matrix nta = pt.n().transpose() * a.n;
  const Matrix rhs = mta.transpose() - mta + nta.transpose() - nta;
  const Matrix& c = pt.shifted_gram_n();
  Matrix omega = sylvester_solve(c, c, rhs);
  FactorPair out{a.m + pt.m() * omega, a.n + pt.n() * omega};
  return {LiftPair{pt, std::move(out), true}, std::move(omega)};
}

ProjectionSolution horizontal_project(const Point& pt, const LiftPair& a) {
  require_attached(pt, a, "horizontal_project");
  return horizontal_project(pt, a.dir);
}

FactorPair connection_total(const Point& pt, const FactorPair& dy) {
  return tangent_project_total_raw(pt, dy);
}

LiftPair connection_total(const Point& pt, const LiftPair& x, const VectorField& y) {
  require_attached(pt, x, "connection_total");
  const FactorPair dy = y.derivative(pt.factors(), x.dir);
  require_shape(pt, dy, "connection_total(field derivative)");
  return {pt, connection_total(pt, dy), false};
}

LiftPair connection_quotient(const Point& pt, const LiftPair& x, const VectorField& y) {
  require_attached(pt, x, "connection_quotient");
  require_horizontal(pt, x.dir, "connection_quotient(direction)");
  const FactorPair yv = y.value(pt.factors());
  require_shape(pt, yv, "connection_quotient(field value)");
  require_horizontal(pt, yv, "connection_quotient(field value)");
  const FactorPair dy = y.derivative(pt.factors(), x.dir);
  require_shape(pt, dy, "connection_quotient(field derivative)");
  return horizontal_project(pt, connection_total(pt, dy)).lift;
}

LiftPair lifted_gradient(const Point& pt, const EuclideanOracle& oracle) {
  if (oracle.rows() != pt.rows_m() || oracle.cols() != pt.rows_n()) {
    throw DimensionError("lifted_gradient: oracle and point dimensions differ");
  }
  const FactorPair euclidean{oracle.grad_right(pt.factors(), pt.n()),
                             oracle.grad_left(pt.factors(), pt.m())};
  return {pt, tangent_project_total_raw(pt, euclidean), true};
}

TotalExp exp_total(const Point& pt, const LiftPair& h) {
  require_attached(pt, h, "exp_total");
  require_stiefel_tangent(pt, h.dir.m, "exp_total");
  const Eigen::Index p = pt.rank();
  const Matrix& xm = h.dir.m;
  const Matrix a = pt.m().transpose() * xm;
  const Matrix s = xm.transpose() * xm;

  Matrix block(2 * p, 2 * p);
  block << a, -s, Matrix::Identity(p, p), a;
  const Matrix e = kernels::matrix_exp(block);
  const Matrix coeff = e.leftCols(p) * kernels::matrix_exp(-a);

  TotalExp out;
  out.factors.m = pt.m() * coeff.topRows(p) + xm * coeff.bottomRows(p);
  out.factors.n = pt.n() + h.dir.n;
  out.orthonormality_drift =
      (out.factors.m.transpose() * out.factors.m - Matrix::Identity(p, p)).norm();
  return out;
}

Point exp_quotient(const Point& pt, const LiftPair& h, double t) {
  require_attached(pt, h, "exp_quotient");
  require_horizontal(pt, h.dir, "exp_quotient");
  const LiftPair scaled{pt, t * h.dir, true};
  TotalExp e = exp_total(pt, scaled);
  {
    const Matrix gram = e.factors.n.transpose() * e.factors.n;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 1e-20 * pt.gram_n().trace())) {
      throw RankError("exp_quotient: factor N lost rank along the step");
    }
  }
  if (e.orthonormality_drift > kDriftWarning) {
    std::clog << "warning: exp_quotient: orthonormality drift " << e.orthonormality_drift
              << ", re-orthonormalizing\n";
  }
  if (e.orthonormality_drift > kReorthTrigger) {
    return reorthonormalize(e.factors, pt.orth_tol());
  }
  return Point(std::move(e.factors), pt.orth_tol());
}

Point reorthonormalize(const FactorPair& drifted, double orth_tol) {
  if (drifted.m.cols() != drifted.n.cols()) {
    throw DimensionError("reorthonormalize: factors must have the same number of columns");
  }
  auto [q, r] = kernels::qr_positive(drifted.m);
  Matrix n = drifted.n * r.transpose();
  return Point(std::move(q), std::move(n), orth_tol);
}

}  // namespace fixedrank::stiefel
