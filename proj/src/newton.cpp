#include "fixedrank/newton.hpp"

namespace fixedrank {

std::string_view to_string(NewtonStatus s) {
  switch (s) {
    case NewtonStatus::kConverged:
      return "converged";
    case NewtonStatus::kMaxIter:
      return "max_iter";
    case NewtonStatus::kSolverFailure:
      return "solver_failure";
    case NewtonStatus::kRankBreakdown:
      return "rank_breakdown";
  }
  return "unknown";
}

FactorPair BalancedGeometry::hessian(const Point& pt, const VectorField& field, const FactorPair& y,
                                     const FactorPair& xi) {
  const FactorPair dy = field.derivative(pt.factors(), xi);
  return balanced::horizontal_project(pt, balanced::connection_total(pt, xi, y, dy)).lift.dir;
}

BalancedGeometry::Point BalancedGeometry::move(const Point& pt, const FactorPair& xi, double t) {
  return balanced::retract(pt, balanced::LiftPair{pt, t * xi, true});
}

FactorPair StiefelGeometry::hessian(const Point& pt, const VectorField& field, const FactorPair&,
                                    const FactorPair& xi) {
  const FactorPair dy = field.derivative(pt.factors(), xi);
  return stiefel::horizontal_project(pt, stiefel::connection_total(pt, dy)).lift.dir;
}

StiefelGeometry::Point StiefelGeometry::move(const Point& pt, const FactorPair& xi, double t) {
  return stiefel::exp_quotient(pt, stiefel::LiftPair{pt, xi, true}, t);
}

}  // namespace fixedrank
