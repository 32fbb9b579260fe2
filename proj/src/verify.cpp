#include "fixedrank/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "fixedrank/balanced.hpp"
#include "fixedrank/kernels.hpp"
#include "fixedrank/objectives.hpp"
#include "fixedrank/random.hpp"
#include "fixedrank/stiefel.hpp"

namespace fixedrank {

namespace {

using kernels::sym;

constexpr double kExpOrthTol = 1e-9;
constexpr double kExpVelocityTol = 1e-6;
constexpr double kExpAccelerationTol = 1e-4;

// Collects worst-case observations per property, in first-seen order.
class Tally {
 public:
  Tally(std::string geometry, std::vector<PropertyResult>& out) : geometry_(std::move(geometry)), out_(out) {}

  void at_most(const std::string& name, double value, double threshold) {
    PropertyResult& r = slot(name, threshold, false);
    r.observed = std::max(r.observed, std::isnan(value) ? INFINITY : value);
    ++r.cases;
  }
  void at_least(const std::string& name, double value, double threshold) {
    PropertyResult& r = slot(name, threshold, true);
    r.observed = r.cases == 0 ? value : std::min(r.observed, value);
    ++r.cases;
  }

 private:
  PropertyResult& slot(const std::string& name, double threshold, bool lower) {
    auto it = index_.find(name);
    if (it == index_.end()) {
      it = index_.emplace(name, out_.size()).first;
      PropertyResult r;
      r.geometry = geometry_;
      r.name = name;
      r.threshold = threshold;
      r.lower_bound = lower;
      out_.push_back(r);
    }
    return out_[it->second];
  }

  std::string geometry_;
  std::vector<PropertyResult>& out_;
  std::map<std::string, std::size_t> index_;
};

double ratio(double num, double den) { return den > 0.0 ? num / den : num; }

double sylvester_residual(const Matrix& a, const Matrix& b, const Matrix& k, const Matrix& c) {
  return ratio((a * k + k * b - c).norm(), (a.norm() + b.norm()) * k.norm() + c.norm());
}

Matrix tangent_at(Random& rng, const FactorPair& x) {
  Matrix z = rng.gaussian(x.m.rows(), x.m.cols()) * x.n.transpose() +
             x.m * rng.gaussian(x.n.rows(), x.n.cols()).transpose();
  return z / z.norm();
}

Eigen::Index numerical_rank(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s(i) > 1e-10 * s(0) ? 1 : 0;
  return r;
}

template <class Dpi, class Direction>
double dimension_defect(Eigen::Index m, Eigen::Index n, Eigen::Index p, Dpi dpi, Direction dir) {
  const Eigen::Index dim = p * (m + n - p);
  const Eigen::Index count = dim + p * p;
  Matrix images(m * n, count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const Matrix z = dpi(dir());
    images.col(k) = Eigen::Map<const Vector>(z.data(), z.size());
  }
  return static_cast<double>(std::abs(numerical_rank(images) - dim));
}

// Random r×p factor with singular values in [1/2, 2]. Raw Gaussian square
// factors are too often near-singular for absolute tolerances to mean anything.
Matrix conditioned(Random& rng, Eigen::Index r, Eigen::Index p) {
  Vector s(p);
  for (Eigen::Index i = 0; i < p; ++i) s(i) = std::exp2(2.0 * rng.uniform() - 1.0);
  return rng.orthonormal(r, p) * s.asDiagonal() * rng.orthonormal(p, p).transpose();
}

template <class F>
double central(F&& f, double h) {
  return (f(h) - f(-h)) / (2.0 * h);
}

// ---------------------------------------------------------------------------

// Returns the relative Euclidean-metric discrepancy under a fixed gauge
// (NaN for p = 1, where every gauge is a scalar).
double balanced_trial(Random& rng, Eigen::Index m, Eigen::Index n, Eigen::Index p, bool first,
                      const VerifyConfig& cfg, Tally& t) {
  using namespace balanced;
  const Point pt(conditioned(rng, m, p), conditioned(rng, n, p));
  const double tol = cfg.algebra_tol;

  // Lift.
  const Matrix u = rng.gaussian(m, p), v = rng.gaussian(n, p);
  Matrix z = u * pt.n().transpose() + pt.m() * v.transpose();
  const double zs = z.norm();
  z /= zs;
  const LiftSolution lift = horizontal_lift(pt, z);
  const Matrix w = pt.gram_m() * pt.gram_n();
  t.at_most("sylvester residual: lift", sylvester_residual(w, w, lift.k, pt.m().transpose() * z * pt.n()), tol);
  t.at_most("lift/dpi roundtrip", ratio((dpi(pt, lift.lift) - z).norm(), z.norm()), tol);
  t.at_most("lift is horizontal", relative_horizontality_residual(pt, lift.lift.dir), tol);
  const LiftSolution factored = horizontal_lift_factored(pt, u / zs, v / zs);
  t.at_most("factored lift = dense lift", ratio(frobenius(factored.lift.dir - lift.lift.dir), frobenius(lift.lift.dir)), tol);

  // Projection and the horizontal/vertical split.
  const FactorPair a = rng.unit_pair(m, n, p);
  const ProjectionSolution proj = horizontal_project(pt, a);
  const Matrix wp = pt.gram_n() * pt.gram_m();
  const Matrix rhs = -pt.gram_n() * (pt.m().transpose() * a.m) + (a.n.transpose() * pt.n()) * pt.gram_m();
  t.at_most("sylvester residual: projection", sylvester_residual(wp, wp, proj.rdot, rhs), tol);
  const FactorPair h = proj.lift.dir;
  const FactorPair rest = a - h;
  const FactorPair vert = vertical_vector(pt, {-proj.rdot}).dir;
  t.at_most("split: remainder is vertical", ratio(frobenius(rest - vert), frobenius(a)), tol);
  const double nh = std::sqrt(metric(pt, h, h)), nr = std::sqrt(metric(pt, rest, rest));
  t.at_most("split: parts are orthogonal", ratio(std::abs(metric(pt, h, rest)), nh * nr), tol);
  t.at_most("projection is idempotent", ratio(frobenius(horizontal_project(pt, h).lift.dir - h), frobenius(h)), tol);
  t.at_most("projection fixes horizontal lifts",
            ratio(frobenius(horizontal_project(pt, lift.lift).lift.dir - lift.lift.dir), frobenius(lift.lift.dir)), tol);

  const FactorPair vv = vertical_vector(pt, {rng.gaussian(p, p)}).dir;
  const double nv = std::sqrt(metric(pt, vv, vv));
  const double nl = std::sqrt(metric(pt, lift.lift.dir, lift.lift.dir));
  t.at_most("vertical is orthogonal to horizontal", ratio(std::abs(metric(pt, vv, lift.lift.dir)), nv * nl), tol);
  t.at_most("dpi annihilates vertical", ratio(dpi(pt, vv).norm(), frobenius(vv) * (pt.m().norm() + pt.n().norm())), tol);

  // Invariance along fibers.
  const Matrix r = Matrix::Identity(p, p) + 0.5 * rng.gaussian(p, p) / std::sqrt(double(p));
  const GaugeTransform g{r};
  const LiftSolution second = horizontal_lift(pt, tangent_at(rng, pt.factors()));
  const LiftPair ta = fiber_transport(lift, g), tb = fiber_transport(second, g);
  const double before = metric(pt, lift.lift, second.lift);
  const double scale = nl * std::sqrt(metric(pt, second.lift, second.lift));
  t.at_most("metric invariance along fibers", ratio(std::abs(metric(ta.base, ta, tb) - before), scale), tol);
  const LiftSolution fresh = horizontal_lift(ta.base, z);
  t.at_most("transported lift = lift at moved point", ratio(frobenius(ta.dir - fresh.lift.dir), frobenius(fresh.lift.dir)),
            cfg.covariance_tol);

  double euclidean = std::nan("");
  if (p >= 2) {
    Matrix d = Matrix::Identity(p, p);
    d(0, 0) = 2.0;
    d(1, 1) = 0.5;
    const Point moved = transport_point(pt, {d});
    const Matrix z2 = tangent_at(rng, pt.factors());
    const double e0 = euclidean_metric(euclidean_horizontal_lift(pt, z), euclidean_horizontal_lift(pt, z2));
    const double e1 = euclidean_metric(euclidean_horizontal_lift(moved, z), euclidean_horizontal_lift(moved, z2));
    euclidean = ratio(std::abs(e1 - e0), std::abs(e0));
    const LiftPair la = fiber_transport(lift, {d});
    const LiftPair lb = fiber_transport(second, {d});
    t.at_most("same data, scaled metric stays invariant", ratio(std::abs(metric(la.base, la, lb) - before), scale), tol);
  }

  // Connection: constant fields, central differences of the metric.
  const FactorPair x = rng.unit_pair(m, n, p), y = rng.unit_pair(m, n, p), c = rng.unit_pair(m, n, p);
  auto g_at = [&](const FactorPair& dir, const FactorPair& e1, const FactorPair& e2) {
    return central([&](double s) { return metric(Point(pt.factors() + s * dir), e1, e2); }, cfg.fd_step);
  };
  const FactorPair zero = FactorPair::zeros(m, n, p);
  const FactorPair nxy = connection_total(pt, x, y, zero);
  const FactorPair nxc = connection_total(pt, x, c, zero);
  t.at_most("metric compatibility (FD)", std::abs(g_at(x, y, c) - metric(pt, nxy, c) - metric(pt, y, nxc)), cfg.fd_tol);
  const double koszul = g_at(x, y, c) + g_at(y, x, c) - g_at(c, x, y);
  t.at_most("Koszul identity, constant fields (FD)", std::abs(2.0 * metric(pt, nxy, c) - koszul), cfg.fd_tol);
  t.at_most("torsion free", frobenius(nxy - connection_total(pt, y, x, zero)), tol);

  const Matrix target = rng.gaussian(m, n) / std::sqrt(double(m * n));
  const auto oracle = approx_oracle({target});
  const VectorField grad = gradient_field_balanced(oracle);
  const LiftPair cq = connection_quotient(pt, lift.lift, grad);
  const LiftPair cq_moved = connection_quotient(ta.base, ta, grad);
  t.at_most("quotient connection is gauge covariant",
            ratio(frobenius(cq_moved.dir - fiber_transport(cq, g).dir), frobenius(cq_moved.dir)), cfg.covariance_tol);
  t.at_most("quotient connection is horizontal", relative_horizontality_residual(pt, cq.dir), tol);

  const LiftPair gl = lifted_gradient(pt, *oracle);
  const LiftPair xi = horizontal_project(pt, rng.unit_pair(m, n, p)).lift;
  const double fd = central([&](double s) { return oracle->value(pt.factors() + s * xi.dir); }, cfg.fd_step);
  t.at_most("lifted gradient (FD)", std::abs(metric(pt, gl, xi) - fd) / std::max(1.0, std::abs(fd)), cfg.fd_tol);

  if (first) {
    t.at_most("dimension of horizontal space",
              dimension_defect(m, n, p, [&](const FactorPair& d) { return dpi(pt, d); },
                               [&] { return rng.unit_pair(m, n, p); }),
              0.0);
  }
  return euclidean;
}

// Tangent field (M,N) ↦ P^{St×ℝ}(c) with its exact derivative.
struct ProjectedConstant {
  FactorPair c;
  FactorPair value(const FactorPair& at) const { return {c.m - at.m * sym(at.m.transpose() * c.m), c.n}; }
  FactorPair derivative(const FactorPair& at, const FactorPair& d) const {
    return {-d.m * sym(at.m.transpose() * c.m) - at.m * sym(d.m.transpose() * c.m),
            Matrix::Zero(c.n.rows(), c.n.cols())};
  }
};

void stiefel_trial(Random& rng, Eigen::Index m, Eigen::Index n, Eigen::Index p, bool first,
                   const VerifyConfig& cfg, Tally& t) {
  using namespace stiefel;
  const Point pt(rng.orthonormal(m, p), conditioned(rng, n, p));
  const double tol = cfg.algebra_tol;
  const Matrix& sg = pt.shifted_gram_n();

  const Matrix u = rng.gaussian(m, p), v = rng.gaussian(n, p);
  Matrix z = u * pt.n().transpose() + pt.m() * v.transpose();
  const double zs = z.norm();
  z /= zs;
  const LiftSolution lift = horizontal_lift(pt, z);
  const Matrix mtzn = pt.m().transpose() * z * pt.n();
  t.at_most("sylvester residual: lift", sylvester_residual(sg, sg, lift.omega, mtzn - mtzn.transpose()), tol);
  t.at_most("lift/dpi roundtrip", ratio((dpi(pt, lift.lift) - z).norm(), z.norm()), tol);
  t.at_most("lift is horizontal", relative_horizontality_residual(pt, lift.lift.dir), tol);
  t.at_most("lift is tangent to St x R", stiefel_tangency_residual(pt, lift.lift.xm()), tol);
  t.at_most("omega is skew", ratio((lift.omega + lift.omega.transpose()).norm(), lift.omega.norm()), tol);
  const LiftSolution factored = horizontal_lift_factored(pt, u / zs, v / zs);
  t.at_most("factored lift = dense lift", ratio(frobenius(factored.lift.dir - lift.lift.dir), frobenius(lift.lift.dir)), tol);

  FactorPair a = rng.unit_pair(m, n, p);
  a = tangent_project_total_raw(pt, a);
  const ProjectionSolution proj = horizontal_project(pt, a);
  const Matrix mta = pt.m().transpose() * a.m, nta = pt.n().transpose() * a.n;
  t.at_most("sylvester residual: projection",
            sylvester_residual(sg, sg, proj.omega, mta.transpose() - mta + nta.transpose() - nta), tol);
  const FactorPair h = proj.lift.dir;
  const FactorPair rest = a - h;
  t.at_most("split: remainder is vertical",
            ratio(frobenius(rest - vertical_vector(pt, -proj.omega).dir), frobenius(a)), tol);
  t.at_most("split: parts are orthogonal", ratio(std::abs(trace_inner(h, rest)), frobenius(h) * frobenius(rest)), tol);
  t.at_most("projection is idempotent", ratio(frobenius(horizontal_project(pt, h).lift.dir - h), frobenius(h)), tol);
  t.at_most("projection fixes horizontal lifts",
            ratio(frobenius(horizontal_project(pt, lift.lift).lift.dir - lift.lift.dir), frobenius(lift.lift.dir)), tol);

  if (p >= 2) {
    const Matrix q = rng.gaussian(p, p);
    const FactorPair vv = vertical_vector(pt, q - q.transpose()).dir;
    t.at_most("vertical is orthogonal to horizontal",
              ratio(std::abs(trace_inner(vv, lift.lift.dir)), frobenius(vv) * frobenius(lift.lift.dir)), tol);
    t.at_most("dpi annihilates vertical", ratio(dpi(pt, vv).norm(), frobenius(vv) * (pt.m().norm() + pt.n().norm())), tol);
  }

  const GaugeRotation g{rng.orthonormal(p, p)};
  const LiftSolution second = horizontal_lift(pt, tangent_at(rng, pt.factors()));
  const LiftPair ta = fiber_transport(lift, g), tb = fiber_transport(second, g);
  const double before = metric(pt, lift.lift, second.lift);
  const double scale = frobenius(lift.lift.dir) * frobenius(second.lift.dir);
  t.at_most("metric invariance along fibers", ratio(std::abs(metric(ta.base, ta, tb) - before), scale), tol);
  const LiftSolution fresh = horizontal_lift(ta.base, z);
  t.at_most("transported lift = lift at moved point", ratio(frobenius(ta.dir - fresh.lift.dir), frobenius(fresh.lift.dir)),
            cfg.covariance_tol);

  // Connection on projected constant fields, differentiated along geodesics.
  const ProjectedConstant fx{rng.unit_pair(m, n, p)}, fy{rng.unit_pair(m, n, p)}, fz{rng.unit_pair(m, n, p)};
  const FactorPair& at = pt.factors();
  const FactorPair x = fx.value(at), y = fy.value(at), w = fz.value(at);
  auto along = [&](const FactorPair& dir, const ProjectedConstant& e1, const ProjectedConstant& e2) {
    return central(
        [&](double s) {
          const FactorPair q = exp_total(pt, LiftPair{pt, s * dir, false}).factors;
          return trace_inner(e1.value(q), e2.value(q));
        },
        cfg.fd_step);
  };
  auto nabla = [&](const FactorPair& dir, const ProjectedConstant& f) {
    return connection_total(pt, f.derivative(at, dir));
  };
  const FactorPair nxy = nabla(x, fy), nxw = nabla(x, fz);
  t.at_most("metric compatibility (FD)", std::abs(along(x, fy, fz) - trace_inner(nxy, w) - trace_inner(y, nxw)), cfg.fd_tol);
  auto bracket = [&](const ProjectedConstant& f1, const FactorPair& v1, const ProjectedConstant& f2, const FactorPair& v2) {
    return f2.derivative(at, v1) - f1.derivative(at, v2);  // [F1, F2]
  };
  const FactorPair bxy = bracket(fx, x, fy, y), bxz = bracket(fx, x, fz, w), byz = bracket(fy, y, fz, w);
  const double koszul = along(x, fy, fz) + along(y, fx, fz) - along(w, fx, fy) + trace_inner(bxy, w) -
                        trace_inner(bxz, y) - trace_inner(byz, x);
  t.at_most("Koszul identity, projected constant fields (FD)", std::abs(2.0 * trace_inner(nxy, w) - koszul), cfg.fd_tol);
  t.at_most("torsion free", frobenius(nxy - nabla(y, fx) - bxy), tol);

  const Matrix target = rng.gaussian(m, n) / std::sqrt(double(m * n));
  const auto oracle = approx_oracle({target});
  const VectorField grad = gradient_field_stiefel(oracle);
  const LiftPair cq = connection_quotient(pt, lift.lift, grad);
  const LiftPair cq_moved = connection_quotient(ta.base, ta, grad);
  t.at_most("quotient connection is gauge covariant",
            ratio(frobenius(cq_moved.dir - fiber_transport(cq, g).dir), frobenius(cq_moved.dir)), cfg.covariance_tol);
  t.at_most("quotient connection is horizontal", relative_horizontality_residual(pt, cq.dir), tol);

  const LiftPair gl = lifted_gradient(pt, *oracle);
  const LiftPair& xi = lift.lift;
  const double fd = central(
      [&](double s) { return oracle->value(exp_total(pt, LiftPair{pt, s * xi.dir, false}).factors); }, cfg.fd_step);
  t.at_most("lifted gradient (FD)", std::abs(metric(pt, gl, xi) - fd) / std::max(1.0, std::abs(fd)), cfg.fd_tol);

  // Exponential.
  const TotalExp e0 = exp_total(pt, make_lift(pt, FactorPair::zeros(m, n, p)));
  t.at_most("exp(0) is the base point", frobenius(e0.factors - at), 1e-13);
  const FactorPair hdir = tangent_project_total_raw(pt, rng.unit_pair(m, n, p));
  const double hn = frobenius(hdir);
  const double eps = 1e-5, ee = 1e-3;
  auto curve = [&](double s) { return exp_total(pt, LiftPair{pt, s * hdir, false}).factors; };
  t.at_most("exp initial velocity (FD)", ratio(frobenius((1.0 / (2 * eps)) * (curve(eps) - curve(-eps)) - hdir), hn),
            kExpVelocityTol);
  for (double s : {0.5, 1.0, 2.0}) {
    const TotalExp es = exp_total(pt, LiftPair{pt, s * hdir, false});
    t.at_most("exp keeps M orthonormal", es.orthonormality_drift, kExpOrthTol);
    const Matrix acc = (curve(s + ee).m - 2.0 * es.factors.m + curve(s - ee).m) / (ee * ee);
    const Matrix tangential = acc - es.factors.m * sym(es.factors.m.transpose() * acc);
    t.at_most("exp: projected second difference / |h|^2", tangential.norm() / (hn * hn), kExpAccelerationTol);
  }
  if (p == 1) {
    // M on the unit sphere: the M-slot geodesic is a great circle.
    Vector xdot = rng.gaussian(m, 1);
    xdot -= pt.m().col(0) * pt.m().col(0).dot(xdot);
    const double speed = 0.3 + 2.0 * rng.uniform();
    xdot *= speed / xdot.norm();
    const FactorPair hh{xdot, Matrix::Zero(n, 1)};
    const Vector circle = std::cos(speed) * pt.m().col(0) + std::sin(speed) / speed * xdot;
    t.at_most("exp: great circle for p = 1", (exp_total(pt, LiftPair{pt, hh, false}).factors.m.col(0) - circle).norm(),
              1e-10);
  }
  const Point end = exp_quotient(pt, lift.lift, 1.0);
  const FactorPair vel =
      (1.0 / (2 * eps)) * (exp_total(pt, LiftPair{pt, (1.0 + eps) * lift.lift.dir, false}).factors -
                           exp_total(pt, LiftPair{pt, (1.0 - eps) * lift.lift.dir, false}).factors);
  t.at_most("quotient geodesic stays horizontal (FD)", relative_horizontality_residual(end, vel), 1e-8);

  if (first) {
    t.at_most("dimension of horizontal space",
              dimension_defect(m, n, p, [&](const FactorPair& d) { return dpi(pt, d); },
                               [&] { return tangent_project_total_raw(pt, rng.unit_pair(m, n, p)); }),
              0.0);
  }
}

}  // namespace

bool VerifyReport::all_passed() const {
  return !properties.empty() &&
         std::all_of(properties.begin(), properties.end(), [](const PropertyResult& r) { return r.passed(); });
}

VerifyReport run_verify(const VerifyConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::array<Eigen::Index, 3>> dims;
  for (auto m : cfg.ms)
    for (auto n : cfg.ns)
      for (auto p : cfg.ps)
        if (p <= std::min(m, n)) dims.push_back({m, n, p});
  dims.insert(dims.end(), cfg.extra.begin(), cfg.extra.end());

  VerifyReport report;
  std::vector<PropertyResult> bal, st;
  Tally tb("balanced", bal), ts("stiefel", st);
  Random rng(cfg.seed);
  for (const auto& [m, n, p] : dims) {
    // A single draw can sit near a direction pair the gauge barely moves, so
    // the Euclidean failure is the best trial of each instance.
    double euclidean = std::nan("");
    for (int trial = 0; trial < cfg.trials; ++trial) {
      euclidean = std::fmax(euclidean, balanced_trial(rng, m, n, p, trial == 0, cfg, tb));
      stiefel_trial(rng, m, n, p, trial == 0, cfg, ts);
    }
    if (!std::isnan(euclidean)) tb.at_least("euclidean metric is not fiber invariant", euclidean, cfg.euclidean_min);
  }
  report.properties = std::move(bal);
  report.properties.insert(report.properties.end(), st.begin(), st.end());
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace fixedrank
