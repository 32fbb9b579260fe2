#pragma once

// Timings of the per-iteration geometry kernels (factored lift, horizontal
// projection, quotient connection) over sweeps of m+n and p. Oracle work
// is excluded; these are the O(p²(m+n+p)) overheads the geometry adds.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fixedrank/experiments.hpp"

namespace fixedrank {

struct BenchConfig {
  std::vector<GeometryKind> geometries{GeometryKind::kBalanced, GeometryKind::kStiefel};
  std::vector<Eigen::Index> sizes{500, 1000, 2000, 4000};  // m+n, with m = ⌈(m+n)/2⌉
  Eigen::Index p = 5;                                      // rank of the size sweep
  std::vector<Eigen::Index> ps{2, 3, 4, 6, 8};             // ranks of the p sweep
  Eigen::Index size = 2000;                                // m+n of the p sweep
  int repeats = 7;          // timed batches; the fastest is kept
  double min_batch_ms = 5.0;
  std::uint64_t seed = 1;
};

struct BenchRow {
  GeometryKind geometry;
  Eigen::Index m, n, p;
  double lift_us, project_us, connection_us;
  double total_us() const { return lift_us + project_us + connection_us; }
};

struct BenchFit {
  GeometryKind geometry;
  std::string sweep;  // "size" or "rank"
  double exponent;    // least-squares slope of log(total) against log(m+n) or log(p)
  int points;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<BenchFit> fits;  // only sweeps with at least two points
};

/// Microseconds per call of one kernel pass at (m, n, p).
BenchRow time_kernels(GeometryKind g, Eigen::Index m, Eigen::Index n, Eigen::Index p, const BenchConfig& cfg);

/// Every distinct (m+n, p) of the two sweeps, once per geometry.
BenchReport run_bench(const BenchConfig& cfg);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// CSV rows (geometry,m,n,p,lift_us,project_us,connection_us,total_us)
/// followed by `# fit ...` comment lines.
void write_bench(std::ostream& out, const BenchReport& report);

}  // namespace fixedrank
