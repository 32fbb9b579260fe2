#include <doctest.h>

#include "fixedrank/balanced.hpp"
#include "fixedrank/errors.hpp"
#include "fixedrank/objectives.hpp"
#include "test_support.hpp"

using namespace fixedrank;
using namespace fixedrank::balanced;
using fixedrank::testing::central_difference;
using fixedrank::testing::random_balanced;
using fixedrank::testing::random_tangent;
using fixedrank::testing::rel_diff;
using fixedrank::testing::Rng;

namespace {

struct Dims {
  Eigen::Index m, n, p;
};
constexpr Dims kDims[] = {{7, 5, 1}, {7, 5, 2}, {12, 9, 3}, {6, 6, 3}, {5, 4, 4}};

LiftPair random_horizontal(Rng& rng, const Point& pt) {
  return horizontal_lift(pt, random_tangent(rng, pt.factors())).lift;
}

// Metric at a moved base point: ḡ at (M,N) + t·x, for fixed ambient y, z.
double metric_along(const Point& pt, const FactorPair& x, const FactorPair& y, const FactorPair& z,
                    double t) {
  const Point moved(pt.m() + t * x.m, pt.n() + t * x.n);
  return metric(moved, y, z);
}

}  // namespace

TEST_CASE("point construction") {
  Rng rng(10);
  const Point pt = random_balanced(rng, 6, 4, 2);
  CHECK((pt.gram_m() * pt.gram_m_inv() - Matrix::Identity(2, 2)).norm() <= 1e-12);
  CHECK((pt.gram_n() * pt.gram_n_inv() - Matrix::Identity(2, 2)).norm() <= 1e-12);

  Matrix bad = rng.gaussian(6, 2);
  bad.col(1) = bad.col(0);
  CHECK_THROWS_AS(Point(bad, rng.gaussian(4, 2)), RankError);
  Matrix ill = rng.gaussian(6, 2);
  ill.col(1) = ill.col(0) + 1e-7 * ill.col(1);  // cond(MᵀM) ≈ 1e14
  CHECK_THROWS_AS(Point(ill, rng.gaussian(4, 2)), RankError);
  CHECK_THROWS_AS(Point(rng.gaussian(6, 2), rng.gaussian(4, 3)), DimensionError);
}

TEST_CASE("metric") {
  Rng rng(11);
  const Point ortho(rng.orthonormal(7, 3), rng.orthonormal(5, 3));
  const FactorPair a = rng.unit_pair(7, 5, 3);
  const FactorPair b = rng.unit_pair(7, 5, 3);
  const LiftPair la = make_lift(ortho, a);
  const LiftPair lb = make_lift(ortho, b);
  CHECK(metric(ortho, la, lb) == doctest::Approx(trace_inner(a, b)).epsilon(1e-13));

  const Point pt = random_balanced(rng, 7, 5, 3);
  const LiftPair pa = make_lift(pt, a);
  const LiftPair pb = make_lift(pt, b);
  CHECK(metric(pt, pa, pb) == doctest::Approx(metric(pt, pb, pa)).epsilon(1e-14));
  CHECK(metric(pt, pa, pa) > 0.0);
  CHECK(metric(pt, make_lift(pt, FactorPair::zeros(7, 5, 3)), pa) == 0.0);
  CHECK_THROWS_AS(metric(pt, la, pb), ContractError);
  CHECK_THROWS_AS(make_lift(pt, FactorPair::zeros(7, 4, 3)), DimensionError);
}

TEST_CASE("vertical vectors") {
  Rng rng(12);
  for (const Dims& d : kDims) {
    const Point pt = random_balanced(rng, d.m, d.n, d.p);
    const LiftPair zero = vertical_vector(pt, {Matrix::Zero(d.p, d.p)});
    CHECK(frobenius(zero.dir) == 0.0);

    const LiftPair v = vertical_vector(pt, {rng.gaussian(d.p, d.p)});
    CHECK(dpi(pt, v).norm() <= 1e-14 * frobenius(v.dir) * pt.product().norm());
    CHECK(horizontality_residual(pt, v) > 1e-3);

    for (int k = 0; k < 5; ++k) {
      const LiftPair h = random_horizontal(rng, pt);
      CHECK(std::abs(metric(pt, v, h)) <= 1e-12 * std::sqrt(metric(pt, v, v) * metric(pt, h, h)));
    }
  }
}

TEST_CASE("dpi against finite differences of the product map") {
  Rng rng(13);
  const Point pt = random_balanced(rng, 8, 6, 2);
  CHECK(dpi(pt, FactorPair::zeros(8, 6, 2)).norm() == 0.0);
  const FactorPair a = rng.unit_pair(8, 6, 2);
  const double h = 1e-6;
  const Matrix fd = ((pt.m() + h * a.m) * (pt.n() + h * a.n).transpose() -
                     (pt.m() - h * a.m) * (pt.n() - h * a.n).transpose()) /
                    (2 * h);
  CHECK(rel_diff(fd, dpi(pt, a)) <= 1e-5);
}

TEST_CASE("horizontal lift") {
  Rng rng(14);
  SUBCASE("zero") {
    const Point pt = random_balanced(rng, 7, 5, 2);
    const LiftSolution s = horizontal_lift(pt, Matrix::Zero(7, 5));
    CHECK(frobenius(s.lift.dir) == 0.0);
    CHECK(s.k.norm() == 0.0);
  }
  SUBCASE("orthonormal factors: closed form") {
    const Point pt(rng.orthonormal(7, 2), rng.orthonormal(5, 2));
    const Matrix z = random_tangent(rng, pt.factors());
    const LiftSolution s = horizontal_lift(pt, z);
    const Matrix mtzn = pt.m().transpose() * z * pt.n();
    CHECK(rel_diff(s.k, 0.5 * mtzn) <= 1e-12);
    CHECK(rel_diff(s.lift.xm(), z * pt.n() - 0.5 * pt.m() * mtzn) <= 1e-12);
    CHECK(rel_diff(s.lift.xn(), z.transpose() * pt.m() - 0.5 * pt.n() * mtzn.transpose()) <= 1e-12);
  }
  SUBCASE("roundtrip, horizontality and factored form") {
    for (const Dims& d : kDims) {
      for (int trial = 0; trial < 10; ++trial) {
        const Point pt = random_balanced(rng, d.m, d.n, d.p);
        const Matrix u = rng.gaussian(d.m, d.p), v = rng.gaussian(d.n, d.p);
        Matrix z = u * pt.n().transpose() + pt.m() * v.transpose();
        const double scale = z.norm();
        z /= scale;
        const LiftSolution s = horizontal_lift(pt, z);
        CHECK(rel_diff(dpi(pt, s.lift), z) <= 1e-10);
        CHECK(horizontality_residual(pt, s.lift) <= 1e-10);
        const Matrix w = pt.gram_m() * pt.gram_n();
        CHECK((pt.m().transpose() * z * pt.n() - w * s.k - s.k * w).norm() <=
              1e-10 * 2 * w.norm() * s.k.norm());
        const LiftSolution f = horizontal_lift_factored(pt, u / scale, v / scale);
        CHECK(rel_diff(f.lift.dir, s.lift.dir) <= 1e-10);
      }
    }
  }
  SUBCASE("tangency is enforced") {
    const Point pt = random_balanced(rng, 7, 5, 2);
    CHECK_THROWS_AS(horizontal_lift(pt, rng.gaussian(7, 5)), TangencyError);
    CHECK_THROWS_AS(horizontal_lift(pt, rng.gaussian(5, 7)), DimensionError);
  }
}

TEST_CASE("lift of dpi recovers horizontal vectors") {
  Rng rng(15);
  for (const Dims& d : kDims) {
    const Point pt = random_balanced(rng, d.m, d.n, d.p);
    const LiftPair h = horizontal_project(pt, rng.unit_pair(d.m, d.n, d.p)).lift;
    const LiftSolution back = horizontal_lift(pt, dpi(pt, h));
    CHECK(rel_diff(back.lift.dir, h.dir) <= 1e-9);
  }
}

TEST_CASE("fiber transport") {
  Rng rng(16);
  for (const Dims& d : kDims) {
    const Point pt = random_balanced(rng, d.m, d.n, d.p);
    const LiftSolution sol = horizontal_lift(pt, random_tangent(rng, pt.factors()));

    const LiftPair same = fiber_transport(sol, {Matrix::Identity(d.p, d.p)});
    CHECK(rel_diff(same.dir, sol.lift.dir) <= 1e-14);

    const GaugeTransform g{rng.gauge(d.p)};
    const LiftPair moved = fiber_transport(sol, g);
    CHECK(horizontality_residual(moved.base, moved) <= 1e-10 * frobenius(moved.dir));
    CHECK(rel_diff(dpi(moved.base, moved), dpi(pt, sol.lift)) <= 1e-10);
    const LiftSolution fresh = horizontal_lift(moved.base, dpi(pt, sol.lift));
    CHECK(rel_diff(moved.dir, fresh.lift.dir) <= 1e-9);
  }
  const Point pt = random_balanced(rng, 6, 5, 2);
  const LiftSolution sol = horizontal_lift(pt, random_tangent(rng, pt.factors()));
  Matrix singular = Matrix::Identity(2, 2);
  singular(1, 1) = 1e-14;
  CHECK_THROWS_AS(fiber_transport(sol, {singular}), GaugeError);
  CHECK_THROWS_AS(fiber_transport(vertical_vector(pt, {rng.gaussian(2, 2)}), {Matrix::Identity(2, 2)}),
                  ContractError);
}

TEST_CASE("metric invariance along fibers, and its failure for the Euclidean metric") {
  Rng rng(17);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Dims& d = kDims[trial % 5];
    const Point pt = random_balanced(rng, d.m, d.n, d.p);
    const LiftSolution a = horizontal_lift(pt, random_tangent(rng, pt.factors()));
    const LiftSolution b = horizontal_lift(pt, random_tangent(rng, pt.factors()));
    const GaugeTransform g{rng.gauge(d.p)};
    const LiftPair ta = fiber_transport(a, g);
    const LiftPair tb = fiber_transport(b, g);
    const double before = metric(pt, a.lift, b.lift);
    const double after = metric(ta.base, ta, tb);
    const double scale = std::sqrt(metric(pt, a.lift, a.lift) * metric(pt, b.lift, b.lift));
    worst = std::max(worst, std::abs(after - before) / scale);
  }
  CHECK(worst <= 1e-10);

  // Euclidean metric with its own lifts, scaling gauge diag(2, 1/2, 1, ...).
  double largest = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index p = 2 + trial % 2;
    const Point pt = random_balanced(rng, 7, 5, p);
    Matrix r = Matrix::Identity(p, p);
    r(0, 0) = 2.0;
    r(1, 1) = 0.5;
    const Point moved = transport_point(pt, {r});
    const Matrix z1 = random_tangent(rng, pt.factors());
    const Matrix z2 = random_tangent(rng, pt.factors());
    const double before =
        euclidean_metric(euclidean_horizontal_lift(pt, z1), euclidean_horizontal_lift(pt, z2));
    const double after = euclidean_metric(euclidean_horizontal_lift(moved, z1),
                                          euclidean_horizontal_lift(moved, z2));
    largest = std::max(largest, std::abs(after - before) / std::max(std::abs(before), 1e-300));
  }
  CHECK(largest >= 1e-2);
}

TEST_CASE("euclidean horizontal lift") {
  Rng rng(18);
  const Point pt = random_balanced(rng, 7, 5, 2);
  CHECK(frobenius(euclidean_horizontal_lift(pt, Matrix::Zero(7, 5)).dir) == 0.0);
  const Matrix z = random_tangent(rng, pt.factors());
  const LiftPair e = euclidean_horizontal_lift(pt, z);
  CHECK(rel_diff(dpi(pt, e), z) <= 1e-10);
  // Horizontal for the trace metric: MᵀẊ_M = Ẋ_NᵀN.
  CHECK((pt.m().transpose() * e.xm() - e.xn().transpose() * pt.n()).norm() <= 1e-12);
}

TEST_CASE("horizontal projection") {
  Rng rng(19);
  for (const Dims& d : kDims) {
    const Point pt = random_balanced(rng, d.m, d.n, d.p);

    const LiftPair h = random_horizontal(rng, pt);
    const ProjectionSolution ph = horizontal_project(pt, h);
    CHECK(ph.rdot.norm() <= 1e-10 * frobenius(h.dir));
    CHECK(rel_diff(ph.lift.dir, h.dir) <= 1e-10);

    const LiftPair v = vertical_vector(pt, {rng.gaussian(d.p, d.p)});
    CHECK(frobenius(horizontal_project(pt, v).lift.dir) <= 1e-10 * frobenius(v.dir));

    for (int trial = 0; trial < 10; ++trial) {
      const LiftPair a = make_lift(pt, rng.unit_pair(d.m, d.n, d.p));
      const ProjectionSolution pa = horizontal_project(pt, a);
      const LiftPair rest{pt, a.dir - pa.lift.dir, false};
      // Direct sum: horizontal part plus a vertical part generated by −Ṙ.
      CHECK(horizontality_residual(pt, pa.lift) <= 1e-9);
      CHECK(rel_diff(rest.dir, vertical_vector(pt, {-pa.rdot}).dir, 1.0) <= 1e-10);
      CHECK(std::abs(metric(pt, rest, pa.lift)) <= 1e-10);
      CHECK(rel_diff(horizontal_project(pt, pa.lift).lift.dir, pa.lift.dir) <= 1e-10);
    }
  }
}

TEST_CASE("dimension of the quotient") {
  Rng rng(20);
  for (const Dims& d : kDims) {
    const Point pt = random_balanced(rng, d.m, d.n, d.p);
    const Eigen::Index dim = d.p * (d.m + d.n - d.p);
    const Eigen::Index count = dim + d.p * d.p;
    Matrix images(d.m * d.n, count);
    for (Eigen::Index k = 0; k < count; ++k) {
      const Matrix z = dpi(pt, rng.unit_pair(d.m, d.n, d.p));
      images.col(k) = Eigen::Map<const Vector>(z.data(), z.size());
    }
    Eigen::JacobiSVD<Matrix> svd(images);
    const auto& s = svd.singularValues();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) rank += s(i) > 1e-10 * s(0) ? 1 : 0;
    CHECK(rank == dim);
  }
}

TEST_CASE("connection on the total space") {
  Rng rng(21);
  SUBCASE("constant field reduction at orthonormal factors") {
    const Eigen::Index p = 2;
    const Point pt(rng.orthonormal(7, p), rng.orthonormal(5, p));
    // Directions whose M- and N-slots have skew products with the factors.
    auto skewed = [&](const Matrix& base) {
      const Matrix w0 = rng.gaussian(p, p);
      const Matrix w = w0 - w0.transpose();
      const Matrix perp = rng.gaussian(base.rows(), p);
      return Matrix(base * w + (perp - base * (base.transpose() * perp)));
    };
    const FactorPair x{skewed(pt.m()), skewed(pt.n())};
    const FactorPair y{skewed(pt.m()), skewed(pt.n())};
    const LiftPair out = connection_total(pt, make_lift(pt, x), constant_field(y));
    const auto sym = [](const Matrix& z) { return Matrix(0.5 * (z + z.transpose())); };
    CHECK(rel_diff(out.xm(), pt.m() * sym(x.m.transpose() * y.m)) <= 1e-12);
    CHECK(rel_diff(out.xn(), pt.n() * sym(x.n.transpose() * y.n)) <= 1e-12);
  }
  SUBCASE("metric compatibility, torsion-freeness and Koszul for constant fields") {
    const double h = 1e-6;
    for (const Dims& d : kDims) {
      for (int trial = 0; trial < 5; ++trial) {
        const Point pt(rng.unit(d.m, d.p) * std::sqrt(double(d.p)),
                       rng.unit(d.n, d.p) * std::sqrt(double(d.p)));
        const FactorPair x = rng.unit_pair(d.m, d.n, d.p);
        const FactorPair y = rng.unit_pair(d.m, d.n, d.p);
        const FactorPair z = rng.unit_pair(d.m, d.n, d.p);
        const auto lx = make_lift(pt, x), ly = make_lift(pt, y), lz = make_lift(pt, z);
        const auto fy = constant_field(y), fz = constant_field(z), fx = constant_field(x);

        const double lhs =
            central_difference([&](double t) { return metric_along(pt, x, y, z, t); }, h);
        const double rhs = metric(pt, connection_total(pt, lx, fy).dir, z) +
                           metric(pt, y, connection_total(pt, lx, fz).dir);
        CHECK(std::abs(lhs - rhs) <= 1e-5);

        const FactorPair torsion =
            connection_total(pt, ly, fz).dir - connection_total(pt, lz, fy).dir;
        CHECK(frobenius(torsion) <= 1e-13);

        // 2ḡ(∇_x y, z) = ∂_x ḡ(y,z) + ∂_y ḡ(x,z) − ∂_z ḡ(x,y).
        const double koszul =
            central_difference([&](double t) { return metric_along(pt, x, y, z, t); }, h) +
            central_difference([&](double t) { return metric_along(pt, y, x, z, t); }, h) -
            central_difference([&](double t) { return metric_along(pt, z, x, y, t); }, h);
        CHECK(std::abs(2 * metric(pt, connection_total(pt, lx, fy).dir, z) - koszul) <= 1e-5);
        (void)fx;
      }
    }
  }
}

TEST_CASE("quotient connection") {
  Rng rng(22);
  for (const Dims& d : kDims) {
    const Point pt = random_balanced(rng, d.m, d.n, d.p);
    const Matrix target = rng.gaussian(d.m, d.n);
    const auto oracle = approx_oracle({target});
    const VectorField grad = gradient_field_balanced(oracle);
    const LiftSolution xs = horizontal_lift(pt, random_tangent(rng, pt.factors()));

    const VectorField zero = constant_field(FactorPair::zeros(d.m, d.n, d.p));
    CHECK(frobenius(connection_quotient(pt, xs.lift, zero).dir) == 0.0);

    const LiftPair out = connection_quotient(pt, xs.lift, grad);
    CHECK(horizontality_residual(pt, out) <= 1e-9 * std::max(1.0, frobenius(out.dir)));

    const GaugeTransform g{rng.gauge(d.p)};
    const LiftPair x_moved = fiber_transport(xs, g);
    const LiftPair at_moved = connection_quotient(x_moved.base, x_moved, grad);
    const LiftPair transported = fiber_transport(out, g);
    CHECK(rel_diff(at_moved.dir, transported.dir) <= 1e-8);

    CHECK_THROWS_AS(connection_quotient(pt, vertical_vector(pt, {rng.gaussian(d.p, d.p)}), grad),
                    ContractError);
  }
}

TEST_CASE("lifted gradient") {
  Rng rng(23);
  SUBCASE("critical point") {
    const Point pt = random_balanced(rng, 7, 5, 2);
    const auto oracle = approx_oracle({pt.product()});
    CHECK(frobenius(lifted_gradient(pt, *oracle).dir) <= 1e-13);
  }
  SUBCASE("orthonormal factors") {
    const Point pt(rng.orthonormal(7, 2), rng.orthonormal(5, 2));
    const Matrix a = rng.gaussian(7, 5);
    const LiftPair g = lifted_gradient(pt, *approx_oracle({a}));
    const Matrix r = pt.product() - a;
    CHECK(rel_diff(g.xm(), r * pt.n()) <= 1e-12);
    CHECK(rel_diff(g.xn(), r.transpose() * pt.m()) <= 1e-12);
  }
  SUBCASE("defining property") {
    for (const Dims& d : kDims) {
      const Point pt = random_balanced(rng, d.m, d.n, d.p);
      const auto oracle = approx_oracle({rng.gaussian(d.m, d.n)});
      const LiftPair g = lifted_gradient(pt, *oracle);
      CHECK(horizontality_residual(pt, g) <= 1e-8 * frobenius(g.dir));
      CHECK(rel_diff(g.dir, gradient_field_balanced(oracle).value(pt.factors())) <= 1e-14);
      for (int k = 0; k < 20; ++k) {
        const LiftPair xi = random_horizontal(rng, pt);
        const double fd = central_difference(
            [&](double t) { return oracle->value({pt.m() + t * xi.xm(), pt.n() + t * xi.xn()}); },
            1e-6);
        CHECK(std::abs(metric(pt, g, xi) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("retraction") {
  Rng rng(24);
  const Point pt = random_balanced(rng, 8, 6, 3);
  const Point same = retract(pt, make_lift(pt, FactorPair::zeros(8, 6, 3), true));
  CHECK((same.product() - pt.product()).norm() == 0.0);

  const LiftSolution h = horizontal_lift(pt, random_tangent(rng, pt.factors()));
  const GaugeTransform g{rng.gauge(3)};
  const LiftPair moved = fiber_transport(h, g);
  CHECK(rel_diff(retract(moved.base, moved).product(), retract(pt, h.lift).product()) <= 1e-10);

  double previous = 0.0;
  for (double t : {1e-1, 1e-2, 1e-3}) {
    const Point r = retract(pt, LiftPair{pt, t * h.lift.dir, true});
    const double err = (r.product() - pt.product() - t * dpi(pt, h.lift)).norm() / (t * t);
    if (previous > 0.0) CHECK(err <= 2.0 * previous);
    previous = err;
    CHECK(err <= 10.0);
  }

  CHECK_THROWS_AS(retract(pt, vertical_vector(pt, {rng.gaussian(3, 3)})), ContractError);
  // A horizontal step that annihilates the M factor.
  const Point small(rng.orthonormal(4, 1), rng.orthonormal(3, 1));
  const LiftSolution kill = horizontal_lift_factored(small, -small.m(), Matrix::Zero(3, 1));
  CHECK_THROWS_AS(retract(small, LiftPair{small, 2.0 * kill.lift.dir, true}), RankError);
}
