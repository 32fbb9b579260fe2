#include "fixedrank/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <set>

#include "fixedrank/balanced.hpp"
#include "fixedrank/random.hpp"
#include "fixedrank/stiefel.hpp"

namespace fixedrank {

namespace {

// Keeps the optimizer from discarding a kernel's result.
volatile double g_sink = 0.0;

template <class F>
double time_us(F&& kernel, const BenchConfig& cfg) {
  using Clock = std::chrono::steady_clock;
  long reps = 1;
  for (;;) {
    const auto t0 = Clock::now();
    for (long k = 0; k < reps; ++k) g_sink = g_sink + kernel();
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    if (ms >= cfg.min_batch_ms || reps >= (1L << 24)) break;
    reps = ms > 0.0 ? std::max(2 * reps, static_cast<long>(reps * cfg.min_batch_ms / ms * 1.2)) : 16 * reps;
  }
  double best = INFINITY;
  for (int r = 0; r < std::max(1, cfg.repeats); ++r) {
    const auto t0 = Clock::now();
    for (long k = 0; k < reps; ++k) g_sink = g_sink + kernel();
    best = std::min(best, std::chrono::duration<double, std::micro>(Clock::now() - t0).count() / reps);
  }
  return best;
}

Matrix well_conditioned(Random& rng, Eigen::Index r, Eigen::Index p) {
  Vector s(p);
  for (Eigen::Index i = 0; i < p; ++i) s(i) = 1.0 + rng.uniform();
  return rng.orthonormal(r, p) * s.asDiagonal();
}

BenchRow time_balanced(Random& rng, Eigen::Index m, Eigen::Index n, Eigen::Index p, const BenchConfig& cfg) {
  using namespace balanced;
  const Point pt(well_conditioned(rng, m, p), well_conditioned(rng, n, p));
  const Matrix u = rng.gaussian(m, p), v = rng.gaussian(n, p);
  const FactorPair a = rng.unit_pair(m, n, p);
  const FactorPair x = horizontal_project(pt, rng.unit_pair(m, n, p)).lift.dir;
  const FactorPair y = horizontal_project(pt, rng.unit_pair(m, n, p)).lift.dir;
  const FactorPair dy = rng.unit_pair(m, n, p);
  BenchRow row{GeometryKind::kBalanced, m, n, p, 0, 0, 0};
  row.lift_us = time_us([&] { return horizontal_lift_factored(pt, u, v).k(0, 0); }, cfg);
  row.project_us = time_us([&] { return horizontal_project(pt, a).rdot(0, 0); }, cfg);
  row.connection_us = time_us(
      [&] { return horizontal_project(pt, connection_total(pt, x, y, dy)).rdot(0, 0); }, cfg);
  return row;
}

BenchRow time_stiefel(Random& rng, Eigen::Index m, Eigen::Index n, Eigen::Index p, const BenchConfig& cfg) {
  using namespace stiefel;
  const Point pt(rng.orthonormal(m, p), well_conditioned(rng, n, p));
  const Matrix u = rng.gaussian(m, p), v = rng.gaussian(n, p);
  const FactorPair a = tangent_project_total_raw(pt, rng.unit_pair(m, n, p));
  const FactorPair dy = rng.unit_pair(m, n, p);
  BenchRow row{GeometryKind::kStiefel, m, n, p, 0, 0, 0};
  row.lift_us = time_us([&] { return horizontal_lift_factored(pt, u, v).omega(0, 0); }, cfg);
  row.project_us = time_us([&] { return horizontal_project(pt, a).omega(0, 0); }, cfg);
  row.connection_us =
      time_us([&] { return horizontal_project(pt, connection_total(pt, dy)).omega(0, 0); }, cfg);
  return row;
}

}  // namespace

BenchRow time_kernels(GeometryKind g, Eigen::Index m, Eigen::Index n, Eigen::Index p, const BenchConfig& cfg) {
  Random rng(cfg.seed);
  return g == GeometryKind::kBalanced ? time_balanced(rng, m, n, p, cfg) : time_stiefel(rng, m, n, p, cfg);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t k = std::min(x.size(), y.size());
  if (k < 2) return std::nan("");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= k;
  my /= k;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxx > 0 ? sxy / sxx : std::nan("");
}

BenchReport run_bench(const BenchConfig& cfg) {
  std::set<std::pair<Eigen::Index, Eigen::Index>> points;  // (m+n, p)
  for (Eigen::Index s : cfg.sizes) points.insert({s, cfg.p});
  for (Eigen::Index p : cfg.ps) points.insert({cfg.size, p});

  BenchReport report;
  for (GeometryKind g : cfg.geometries) {
    std::vector<double> size_x, size_y, rank_x, rank_y;
    for (const auto& [s, p] : points) {
      const Eigen::Index m = (s + 1) / 2, n = s - m;
      if (p < 1 || p > std::min(m, n)) throw DimensionError("bench point needs 1 <= p <= min(m, n)");
      const BenchRow row = time_kernels(g, m, n, p, cfg);
      report.rows.push_back(row);
      const bool in_size = p == cfg.p && std::count(cfg.sizes.begin(), cfg.sizes.end(), s) > 0;
      const bool in_rank = s == cfg.size && std::count(cfg.ps.begin(), cfg.ps.end(), p) > 0;
      if (in_size) size_x.push_back(double(s)), size_y.push_back(row.total_us());
      if (in_rank) rank_x.push_back(double(p)), rank_y.push_back(row.total_us());
    }
    if (size_x.size() >= 2) report.fits.push_back({g, "size", loglog_slope(size_x, size_y), int(size_x.size())});
    if (rank_x.size() >= 2) report.fits.push_back({g, "rank", loglog_slope(rank_x, rank_y), int(rank_x.size())});
  }
  return report;
}

void write_bench(std::ostream& out, const BenchReport& report) {
  out << "geometry,m,n,p,lift_us,project_us,connection_us,total_us\n";
  for (const BenchRow& r : report.rows) {
    out << to_string(r.geometry) << ',' << r.m << ',' << r.n << ',' << r.p << ',' << r.lift_us << ','
        << r.project_us << ',' << r.connection_us << ',' << r.total_us() << '\n';
  }
  for (const BenchFit& f : report.fits) {
    out << "# fit geometry=" << to_string(f.geometry) << " sweep=" << f.sweep << " exponent=" << f.exponent
        << " points=" << f.points << '\n';
  }
}

}  // namespace fixedrank
