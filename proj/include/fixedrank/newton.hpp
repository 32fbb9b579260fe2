#pragma once

// Riemannian Newton iteration on the rank-p manifold, posed on horizontal
// lifts in either factor geometry. Each geometry is described by a small
// adapter (BalancedGeometry, StiefelGeometry); the solver is generic.

#include <chrono>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "fixedrank/balanced.hpp"
#include "fixedrank/errors.hpp"
#include "fixedrank/krylov.hpp"
#include "fixedrank/objectives.hpp"
#include "fixedrank/stiefel.hpp"

namespace fixedrank {

enum class StepPolicy { kFullNewton, kArmijoDamped };

struct NewtonConfig {
  int max_outer = 50;
  double grad_tol = 1e-12;
  /// Fixed relative tolerance for the inner solve; 0 selects the forcing
  /// rule max(min(krylov_forcing_cap, ‖grad‖), krylov_forcing_floor).
  double krylov_tol = 0.0;
  double krylov_forcing_cap = 1e-2;
  /// Operator rounding bounds the attainable relative residual; the floor
  /// only binds when grad_tol is set below it.
  double krylov_forcing_floor = 1e-12;
  /// 0 selects the dimension of the horizontal space.
  int krylov_max = 0;
  int warmstart_steps = 0;
  StepPolicy step_policy = StepPolicy::kFullNewton;
  /// Keep every iterate's factors in the result (for diagnostics).
  bool keep_iterates = false;
};

enum class IterationKind { kInitial, kNewton, kDampedNewton };

struct IterationRecord {
  int index = 0;
  double f_value = 0.0;
  double riemannian_grad_norm = 0.0;
  double step_norm = 0.0;
  int krylov_iterations = 0;
  double residual_of_newton_eq = 0.0;
  double wall_time_ms = 0.0;
  /// Step length actually taken along the Newton vector (1 for pure Newton).
  double step_length = 0.0;
  IterationKind kind = IterationKind::kInitial;
};

enum class NewtonStatus { kConverged, kMaxIter, kSolverFailure, kRankBreakdown };

std::string_view to_string(NewtonStatus s);

struct ArmijoParams {
  double initial_step = 1.0;
  double sufficient_decrease = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 60;
};

// ---------------------------------------------------------------------------
// Geometry adapters. Vectors are raw factor pairs attached to the current
// point; the adapters wrap the geometry modules' operations.

struct BalancedGeometry {
  using Point = balanced::Point;
  static constexpr std::string_view name = "balanced";

  static Point make_point(FactorPair factors) { return Point(std::move(factors)); }
  static VectorField gradient_field(std::shared_ptr<const EuclideanOracle> oracle) {
    return gradient_field_balanced(std::move(oracle));
  }
  static double metric(const Point& pt, const FactorPair& a, const FactorPair& b) {
    return balanced::metric(pt, a, b);
  }
  static double relative_horizontality(const Point& pt, const FactorPair& a) {
    return balanced::relative_horizontality_residual(pt, a);
  }
  static FactorPair horizontal(const Point& pt, const FactorPair& a) {
    return balanced::horizontal_project(pt, a).lift.dir;
  }
  /// Pʰ(∇̄_ξ Y) with Y the gradient field and y = Y(pt).
  static FactorPair hessian(const Point& pt, const VectorField& field, const FactorPair& y,
                            const FactorPair& xi);
  /// Retraction (M + tẊ_M, N + tẊ_N).
  static Point move(const Point& pt, const FactorPair& xi, double t);
  static Eigen::Index horizontal_dim(const Point& pt) {
    return pt.rank() * (pt.rows_m() + pt.rows_n() - pt.rank());
  }
};

struct StiefelGeometry {
  using Point = stiefel::Point;
  static constexpr std::string_view name = "stiefel";

  /// Orthonormalizes the M factor (product preserved).
  static Point make_point(const FactorPair& factors) { return stiefel::reorthonormalize(factors); }
  static VectorField gradient_field(std::shared_ptr<const EuclideanOracle> oracle) {
    return gradient_field_stiefel(std::move(oracle));
  }
  static double metric(const Point& pt, const FactorPair& a, const FactorPair& b) {
    return stiefel::metric(pt, a, b);
  }
  static double relative_horizontality(const Point& pt, const FactorPair& a) {
    return stiefel::relative_horizontality_residual(pt, a);
  }
  static FactorPair horizontal(const Point& pt, const FactorPair& a) {
    return stiefel::horizontal_project(pt, stiefel::tangent_project_total_raw(pt, a)).lift.dir;
  }
  /// Pʰ(P^{St×ℝ}(∂_ξ Y)).
  static FactorPair hessian(const Point& pt, const VectorField& field, const FactorPair& y,
                            const FactorPair& xi);
  /// Exponential along t·ξ, re-orthonormalized on drift.
  static Point move(const Point& pt, const FactorPair& xi, double t);
  static Eigen::Index horizontal_dim(const Point& pt) {
    return pt.rank() * (pt.rows_m() + pt.rows_n() - pt.rank());
  }
};

// ---------------------------------------------------------------------------

/// The lifted Newton operator ξ ↦ Pʰ(∇̄_ξ grad f̄) at pt. The returned map
/// checks that its outputs are horizontal (ContractError otherwise).
template <class Geometry>
LinearOperator newton_operator(const typename Geometry::Point& pt, const VectorField& field) {
  FactorPair y = field.value(pt.factors());
  return [pt, field, y = std::move(y)](const FactorPair& xi) {
    FactorPair out = Geometry::hessian(pt, field, y, xi);
    const double r = Geometry::relative_horizontality(pt, out);
    if (!(r <= 1e-8)) {
      throw ContractError("newton operator produced a non-horizontal vector");
    }
    return out;
  };
}

template <class Geometry>
struct NewtonProblem {
  std::shared_ptr<const EuclideanOracle> oracle;
  VectorField field;

  explicit NewtonProblem(std::shared_ptr<const EuclideanOracle> o)
      : oracle(o), field(Geometry::gradient_field(std::move(o))) {}
};

template <class Geometry>
struct StepOutcome {
  std::optional<typename Geometry::Point> point;  // empty on failure
  IterationRecord record;
  NewtonStatus status = NewtonStatus::kConverged;  // kConverged = step taken
  FactorPair step;
};

/// Riemannian gradient step with Armijo backtracking. Returns the accepted
/// point and step length (0 when the gradient vanishes or no step is
/// accepted).
template <class Geometry>
std::pair<typename Geometry::Point, double> riemannian_gradient_step(
    const NewtonProblem<Geometry>& prob, const typename Geometry::Point& pt,
    const ArmijoParams& params = {}) {
  const FactorPair grad = prob.field.value(pt.factors());
  const double gg = Geometry::metric(pt, grad, grad);
  if (!(gg > 0.0)) return {pt, 0.0};
  const double f0 = prob.oracle->value(pt.factors());
  // Exactly horizontal in exact arithmetic; the projection only removes the
  // rounding left by evaluating G·N and Gᵀ·M separately.
  const FactorPair dir = Geometry::horizontal(pt, -grad);
  double t = params.initial_step;
  for (int k = 0; k < params.max_backtracks; ++k, t *= params.shrink) {
    try {
      typename Geometry::Point cand = Geometry::move(pt, dir, t);
      const double f = prob.oracle->value(cand.factors());
      if (f <= f0 - params.sufficient_decrease * t * gg) return {std::move(cand), t};
    } catch (const RankError&) {
      // step left the chart; shorten
    }
  }
  return {pt, 0.0};
}

/// One Newton step at pt: solve the lifted Newton equation by GMRES in the
/// geometry's metric, then move.
template <class Geometry>
StepOutcome<Geometry> newton_step(const NewtonProblem<Geometry>& prob,
                                  const typename Geometry::Point& pt, const NewtonConfig& cfg) {
  StepOutcome<Geometry> out;
  const FactorPair grad = prob.field.value(pt.factors());
  const double gnorm = std::sqrt(std::max(0.0, Geometry::metric(pt, grad, grad)));
  out.record.riemannian_grad_norm = gnorm;
  out.record.f_value = prob.oracle->value(pt.factors());
  if (gnorm == 0.0) {
    out.point = pt;
    out.step = 0.0 * grad;
    out.record.kind = IterationKind::kNewton;
    out.record.step_length = 1.0;
    return out;
  }

  const double tol =
      cfg.krylov_tol > 0.0
          ? cfg.krylov_tol
          : std::max(std::min(cfg.krylov_forcing_cap, gnorm), cfg.krylov_forcing_floor);
  const int maxit =
      cfg.krylov_max > 0 ? cfg.krylov_max : static_cast<int>(Geometry::horizontal_dim(pt));

  KrylovResult kr;
  try {
    const LinearOperator op = newton_operator<Geometry>(pt, prob.field);
    // −grad is horizontal up to rounding; near convergence that rounding is a
    // sizable fraction of it and lies outside the operator's range.
    const FactorPair rhs = Geometry::horizontal(pt, -grad);
    const InnerProduct inner = [&pt](const FactorPair& a, const FactorPair& b) {
      return Geometry::metric(pt, a, b);
    };
    kr = krylov_solve(op, rhs, inner, tol, maxit);
  } catch (const SylvesterError&) {
    out.status = NewtonStatus::kSolverFailure;
    return out;
  }
  out.record.krylov_iterations = kr.iterations;
  out.record.residual_of_newton_eq = kr.relative_residual;
  // The Krylov iterate is a combination of horizontal vectors; re-project to
  // drop the rounding drift accumulated by the Arnoldi recurrence.
  kr.solution = Geometry::horizontal(pt, kr.solution);
  out.step = kr.solution;
  out.record.step_norm = std::sqrt(std::max(0.0, Geometry::metric(pt, kr.solution, kr.solution)));
  if (!kr.converged) {
    out.status = NewtonStatus::kSolverFailure;
    return out;
  }

  if (cfg.step_policy == StepPolicy::kFullNewton) {
    out.record.kind = IterationKind::kNewton;
    out.record.step_length = 1.0;
    try {
      out.point = Geometry::move(pt, kr.solution, 1.0);
    } catch (const RankError&) {
      out.status = NewtonStatus::kRankBreakdown;
    }
    return out;
  }

  // Armijo-damped: backtrack along the Newton vector if it is a descent
  // direction, along −grad otherwise.
  out.record.kind = IterationKind::kDampedNewton;
  FactorPair dir = kr.solution;
  double slope = Geometry::metric(pt, grad, dir);
  if (!(slope < 0.0)) {
    dir = Geometry::horizontal(pt, -grad);
    slope = -gnorm * gnorm;
  }
  const ArmijoParams ap;
  const double f0 = out.record.f_value;
  double t = 1.0;
  for (int k = 0; k < ap.max_backtracks; ++k, t *= ap.shrink) {
    try {
      typename Geometry::Point cand = Geometry::move(pt, dir, t);
      if (prob.oracle->value(cand.factors()) <= f0 + ap.sufficient_decrease * t * slope) {
        out.point = std::move(cand);
        out.record.step_length = t;
        out.step = dir;
        return out;
      }
    } catch (const RankError&) {
    }
  }
  out.status = NewtonStatus::kSolverFailure;
  return out;
}

template <class Geometry>
struct NewtonResult {
  typename Geometry::Point point;
  std::vector<IterationRecord> records;
  NewtonStatus status = NewtonStatus::kMaxIter;
  int warmstart_steps_taken = 0;
  std::vector<FactorPair> iterates;  // filled when cfg.keep_iterates
};

/// Runs (optional gradient warm start, then) Newton until the Riemannian
/// gradient norm drops to cfg.grad_tol, max_outer steps are taken, or a
/// step fails. records[0] describes the starting iterate (after warm start).
template <class Geometry>
NewtonResult<Geometry> newton_run(const NewtonProblem<Geometry>& prob,
                                  typename Geometry::Point start, const NewtonConfig& cfg) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };

  typename Geometry::Point pt = std::move(start);
  int warm = 0;
  double step = 1.0;
  for (int k = 0; k < cfg.warmstart_steps; ++k) {
    ArmijoParams ap;
    ap.initial_step = std::min(1.0, 4.0 * step);
    auto [next, t] = riemannian_gradient_step<Geometry>(prob, pt, ap);
    if (t == 0.0) break;
    pt = std::move(next);
    step = t;
    ++warm;
  }

  NewtonResult<Geometry> res{pt, {}, NewtonStatus::kMaxIter, warm, {}};
  auto grad_norm = [&](const typename Geometry::Point& p) {
    const FactorPair g = prob.field.value(p.factors());
    return std::sqrt(std::max(0.0, Geometry::metric(p, g, g)));
  };

  IterationRecord first;
  first.index = 0;
  first.f_value = prob.oracle->value(pt.factors());
  first.riemannian_grad_norm = grad_norm(pt);
  first.wall_time_ms = elapsed_ms();
  res.records.push_back(first);
  if (cfg.keep_iterates) res.iterates.push_back(pt.factors());

  double current_grad = first.riemannian_grad_norm;
  for (int k = 0;; ++k) {
    if (current_grad <= cfg.grad_tol) {
      res.status = NewtonStatus::kConverged;
      break;
    }
    if (k >= cfg.max_outer) {
      res.status = NewtonStatus::kMaxIter;
      break;
    }
    StepOutcome<Geometry> s = newton_step<Geometry>(prob, pt, cfg);
    if (!s.point) {
      res.status = s.status;
      break;
    }
    pt = std::move(*s.point);
    IterationRecord rec = s.record;
    rec.index = k + 1;
    rec.f_value = prob.oracle->value(pt.factors());
    rec.riemannian_grad_norm = grad_norm(pt);
    rec.wall_time_ms = elapsed_ms();
    current_grad = rec.riemannian_grad_norm;
    res.records.push_back(rec);
    if (cfg.keep_iterates) res.iterates.push_back(pt.factors());
  }
  res.point = pt;
  return res;
}

}  // namespace fixedrank
