#pragma once

#include <memory>
#include <vector>

#include "fixedrank/oracle.hpp"
#include "fixedrank/types.hpp"

namespace fixedrank {

/// f(X) = ½‖X − A‖²_F for a dense target A.
struct ApproximationObjective {
  Matrix a;
};

struct Entry {
  Eigen::Index row;
  Eigen::Index col;
  double value;
};

/// f(X) = ½‖P_Ω(X − A)‖²_F over a set Ω of observed entries.
class CompletionObjective {
 public:
  /// Sorts the entries by (row, col). Throws DimensionError on an index
  /// out of range, on duplicates, or on an empty Ω.
  CompletionObjective(Eigen::Index rows, Eigen::Index cols, std::vector<Entry> entries);

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  Eigen::Index rows_;
  Eigen::Index cols_;
  std::vector<Entry> entries_;
};

std::shared_ptr<const EuclideanOracle> approx_oracle(ApproximationObjective obj);
std::shared_ptr<const EuclideanOracle> completion_oracle(CompletionObjective obj);

/// Gradient of f∘π for the Gram-scaled factor metric,
/// (G·N·MᵀM, Gᵀ·M·NᵀN), with its exact directional derivative.
VectorField gradient_field_balanced(std::shared_ptr<const EuclideanOracle> oracle);

/// Gradient of f∘π on St(p,m)×ℝ^{n×p}: (G·N − M·sym(MᵀG·N), Gᵀ·M), with
/// its exact directional derivative (including that of the projector).
VectorField gradient_field_stiefel(std::shared_ptr<const EuclideanOracle> oracle);

}  // namespace fixedrank
