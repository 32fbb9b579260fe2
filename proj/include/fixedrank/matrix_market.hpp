#pragma once

// MatrixMarket text files: `array` files hold dense matrices (column-major
// values), `coordinate` files hold observed entries for completion. Only
// the `real`/`integer` fields with `general` symmetry are accepted.

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "fixedrank/objectives.hpp"
#include "fixedrank/types.hpp"

namespace fixedrank {

struct SparseEntries {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<Entry> entries;  // 0-based, in file order
};

using MatrixMarketContent = std::variant<Matrix, SparseEntries>;

/// Parses a MatrixMarket stream. Throws ParseError (with the 1-based line
/// number) on a malformed header, size line or data line, on out-of-range
/// or duplicate coordinates, and on a coordinate file without entries.
MatrixMarketContent read_matrix_market(std::istream& in);
MatrixMarketContent load_matrix_market(const std::string& path);

/// Coordinate file as a completion objective.
CompletionObjective load_completion(const std::string& path);
/// Array file as a dense matrix; a coordinate file is rejected.
Matrix load_dense(const std::string& path);

void write_matrix_market(std::ostream& out, const Matrix& a);
void write_matrix_market(std::ostream& out, const SparseEntries& s);
void save_matrix_market(const std::string& path, const Matrix& a);
void save_matrix_market(const std::string& path, const SparseEntries& s);

}  // namespace fixedrank
