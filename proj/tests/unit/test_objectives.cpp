#include <doctest.h>

#include "fixedrank/balanced.hpp"
#include "fixedrank/errors.hpp"
#include "fixedrank/objectives.hpp"
#include "fixedrank/stiefel.hpp"
#include "test_support.hpp"

using namespace fixedrank;
using fixedrank::testing::central_difference;
using fixedrank::testing::rel_diff;
using fixedrank::testing::Rng;

namespace {

CompletionObjective random_completion(Rng& rng, Eigen::Index m, Eigen::Index n, double ratio) {
  std::vector<Entry> entries;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i)
      if (rng.uniform(0.0, 1.0) < ratio) entries.push_back({i, j, rng.normal()});
  if (entries.empty()) entries.push_back({0, 0, 1.0});
  return CompletionObjective(m, n, std::move(entries));
}

CompletionObjective full_mask(const Matrix& a) {
  std::vector<Entry> entries;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) entries.push_back({i, j, a(i, j)});
  return CompletionObjective(a.rows(), a.cols(), std::move(entries));
}

FactorPair unit_factors(Rng& rng, Eigen::Index m, Eigen::Index n, Eigen::Index p) {
  return {rng.unit(m, p) * std::sqrt(double(p)), rng.unit(n, p) * std::sqrt(double(p))};
}

double dot(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

FactorPair along(const FactorPair& x, const FactorPair& d, double t) { return x + t * d; }

// Value/gradient/Hessian probes of an oracle against finite differences.
void probe_oracle(Rng& rng, const EuclideanOracle& f, Eigen::Index p) {
  const Eigen::Index m = f.rows(), n = f.cols();
  for (int k = 0; k < 10; ++k) {
    const FactorPair x = unit_factors(rng, m, n, p);
    const FactorPair d = rng.unit_pair(m, n, p);
    const double fd = central_difference([&](double t) { return f.value(along(x, d, t)); }, 1e-6);
    const double exact = dot(d.m, f.grad_right(x, x.n)) + dot(d.n, f.grad_left(x, x.m));
    CHECK(std::abs(fd - exact) <= 1e-5 * std::max(1.0, std::abs(exact)));

    const Matrix v = rng.gaussian(n, 2), u = rng.gaussian(m, 2);
    const double h = 1e-6;
    const Matrix fd_r =
        (f.grad_right(along(x, d, h), v) - f.grad_right(along(x, d, -h), v)) / (2 * h);
    const Matrix fd_l =
        (f.grad_left(along(x, d, h), u) - f.grad_left(along(x, d, -h), u)) / (2 * h);
    CHECK((fd_r - f.hess_right(x, d, v)).norm() <= 1e-5 * std::max(1.0, fd_r.norm()));
    CHECK((fd_l - f.hess_left(x, d, u)).norm() <= 1e-5 * std::max(1.0, fd_l.norm()));

    // Linearity of the Hessian action in the direction.
    const FactorPair e = rng.unit_pair(m, n, p);
    const double a = rng.normal(), b = rng.normal();
    const Matrix combo = f.hess_right(x, a * d + b * e, v);
    const Matrix split = a * f.hess_right(x, d, v) + b * f.hess_right(x, e, v);
    CHECK((combo - split).norm() <= 1e-10 * std::max(1.0, split.norm()));
    const Matrix combo_l = f.hess_left(x, a * d + b * e, u);
    const Matrix split_l = a * f.hess_left(x, d, u) + b * f.hess_left(x, e, u);
    CHECK((combo_l - split_l).norm() <= 1e-10 * std::max(1.0, split_l.norm()));
  }
}

void probe_field(Rng& rng, const VectorField& field, Eigen::Index m, Eigen::Index n,
                 Eigen::Index p, bool stiefel_base) {
  for (int k = 0; k < 20; ++k) {
    FactorPair x = unit_factors(rng, m, n, p);
    if (stiefel_base) x.m = rng.orthonormal(m, p);
    const FactorPair d = rng.unit_pair(m, n, p);
    const double h = 1e-6;
    const FactorPair fd =
        (1.0 / (2 * h)) * (field.value(along(x, d, h)) - field.value(along(x, d, -h)));
    const FactorPair exact = field.derivative(x, d);
    CHECK(frobenius(fd - exact) <= 1e-5 * std::max(1.0, frobenius(exact)));

    const FactorPair e = rng.unit_pair(m, n, p);
    const FactorPair combo = field.derivative(x, 2.0 * d - 3.0 * e);
    const FactorPair split = 2.0 * field.derivative(x, d) - 3.0 * field.derivative(x, e);
    CHECK(frobenius(combo - split) <= 1e-10 * std::max(1.0, frobenius(split)));
    CHECK(frobenius(field.derivative(x, FactorPair::zeros(m, n, p))) == 0.0);
  }
}

}  // namespace

TEST_CASE("approximation oracle") {
  Rng rng(50);
  const Matrix a = rng.gaussian(7, 5);
  const auto f = approx_oracle({a});
  CHECK(f->rows() == 7);
  CHECK(f->cols() == 5);
  probe_oracle(rng, *f, 2);

  const FactorPair x = unit_factors(rng, 7, 5, 2);
  const Matrix r = x.m * x.n.transpose() - a;
  CHECK(f->value(x) == doctest::Approx(0.5 * r.squaredNorm()).epsilon(1e-14));
  const FactorPair d = rng.unit_pair(7, 5, 2);
  const Matrix v = rng.gaussian(5, 3);
  const Matrix xdot = d.m * x.n.transpose() + x.m * d.n.transpose();
  CHECK((f->hess_right(x, d, v) - xdot * v).norm() <= 1e-13);
  CHECK((f->grad_right(x, v) - r * v).norm() <= 1e-13);

  const auto at_min = approx_oracle({x.m * x.n.transpose()});
  CHECK(at_min->value(x) == 0.0);
  CHECK(at_min->grad_right(x, x.n).norm() <= 1e-15);

  CHECK_THROWS_AS(f->value(unit_factors(rng, 6, 5, 2)), DimensionError);
}

TEST_CASE("completion objective construction") {
  CHECK_THROWS_AS(CompletionObjective(3, 3, {}), DimensionError);
  CHECK_THROWS_AS(CompletionObjective(3, 3, {{3, 0, 1.0}}), DimensionError);
  CHECK_THROWS_AS(CompletionObjective(3, 3, {{0, -1, 1.0}}), DimensionError);
  CHECK_THROWS_AS(CompletionObjective(3, 3, {{1, 1, 1.0}, {1, 1, 2.0}}), DimensionError);
  const CompletionObjective obj(3, 3, {{2, 1, 1.0}, {0, 2, 2.0}, {0, 1, 3.0}});
  REQUIRE(obj.size() == 3);
  CHECK(obj.entries()[0].row == 0);
  CHECK(obj.entries()[0].col == 1);
  CHECK(obj.entries()[2].row == 2);
}

TEST_CASE("completion oracle") {
  Rng rng(51);
  SUBCASE("finite differences") {
    probe_oracle(rng, *completion_oracle(random_completion(rng, 9, 7, 0.4)), 2);
  }
  SUBCASE("full mask equals the approximation oracle") {
    const Matrix a = rng.gaussian(8, 6);
    const auto full = completion_oracle(full_mask(a));
    const auto dense = approx_oracle({a});
    for (int k = 0; k < 5; ++k) {
      const FactorPair x = unit_factors(rng, 8, 6, 3);
      const FactorPair d = rng.unit_pair(8, 6, 3);
      const Matrix v = rng.gaussian(6, 3), u = rng.gaussian(8, 3);
      CHECK(full->value(x) == doctest::Approx(dense->value(x)).epsilon(1e-12));
      CHECK(rel_diff(full->grad_right(x, v), dense->grad_right(x, v)) <= 1e-12);
      CHECK(rel_diff(full->grad_left(x, u), dense->grad_left(x, u)) <= 1e-12);
      CHECK(rel_diff(full->hess_right(x, d, v), dense->hess_right(x, d, v)) <= 1e-12);
      CHECK(rel_diff(full->hess_left(x, d, u), dense->hess_left(x, d, u)) <= 1e-12);
    }
  }
  SUBCASE("single entry") {
    const auto f = completion_oracle(CompletionObjective(5, 4, {{3, 2, 1.5}}));
    const FactorPair x = unit_factors(rng, 5, 4, 2);
    const double xij = x.m.row(3).dot(x.n.row(2));
    Matrix expected = Matrix::Zero(5, 2);
    expected.row(3) = (xij - 1.5) * x.n.row(2);
    CHECK((f->grad_right(x, x.n) - expected).norm() <= 1e-14);
    CHECK(f->value(x) == doctest::Approx(0.5 * (xij - 1.5) * (xij - 1.5)));
  }
}

TEST_CASE("balanced gradient field") {
  Rng rng(52);
  probe_field(rng, gradient_field_balanced(approx_oracle({rng.gaussian(7, 5)})), 7, 5, 2, false);
  probe_field(rng, gradient_field_balanced(completion_oracle(random_completion(rng, 8, 6, 0.5))),
              8, 6, 3, false);

  // The value is the metric gradient of f∘π.
  const auto oracle = approx_oracle({rng.gaussian(9, 6)});
  const VectorField field = gradient_field_balanced(oracle);
  const balanced::Point pt(rng.gaussian(9, 3), rng.gaussian(6, 3));
  const FactorPair g = field.value(pt.factors());
  CHECK(balanced::relative_horizontality_residual(pt, g) <= 1e-10);
  for (int k = 0; k < 20; ++k) {
    const FactorPair d = rng.unit_pair(9, 6, 3);
    const double fd = central_difference(
        [&](double t) { return oracle->value(along(pt.factors(), d, t)); }, 1e-6);
    CHECK(std::abs(balanced::metric(pt, g, d) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("stiefel gradient field") {
  Rng rng(53);
  probe_field(rng, gradient_field_stiefel(approx_oracle({rng.gaussian(7, 5)})), 7, 5, 2, true);
  probe_field(rng, gradient_field_stiefel(completion_oracle(random_completion(rng, 8, 6, 0.5))), 8,
              6, 3, true);

  const auto oracle = completion_oracle(random_completion(rng, 9, 6, 0.6));
  const VectorField field = gradient_field_stiefel(oracle);
  for (int k = 0; k < 10; ++k) {
    const stiefel::Point pt(rng.orthonormal(9, 3), rng.gaussian(6, 3));
    const FactorPair g = field.value(pt.factors());
    CHECK(stiefel::relative_horizontality_residual(pt, g) <= 1e-8);
    CHECK(stiefel::stiefel_tangency_residual(pt, g.m) <= 1e-12);
    // Against any tangent direction of St×ℝ (the projected part is normal).
    const FactorPair d = fixedrank::testing::random_stiefel_tangent(rng, pt);
    const double fd = central_difference(
        [&](double t) { return oracle->value(along(pt.factors(), d, t)); }, 1e-6);
    CHECK(std::abs(trace_inner(g, d) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }

  const stiefel::Point pt(rng.orthonormal(9, 3), rng.gaussian(6, 3));
  const VectorField critical = gradient_field_stiefel(approx_oracle({pt.product()}));
  CHECK(frobenius(critical.value(pt.factors())) <= 1e-13);
}
