#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixedrank/bench.hpp"

using namespace fixedrank;

TEST_CASE("log-log slope recovers a power law") {
  const std::vector<double> x{1, 2, 4, 8, 16};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.7));
  CHECK(loglog_slope(x, y) == doctest::Approx(1.7).epsilon(1e-12));
  CHECK(std::isnan(loglog_slope({2.0}, {5.0})));
}

TEST_CASE("single point sweep gives a one-row CSV") {
  BenchConfig cfg;
  cfg.geometries = {GeometryKind::kBalanced};
  cfg.sizes = {60};
  cfg.p = 3;
  cfg.ps = {3};
  cfg.size = 60;
  cfg.repeats = 1;
  cfg.min_batch_ms = 0.5;
  const BenchReport report = run_bench(cfg);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.fits.empty());
  CHECK(report.rows[0].m == 30);
  CHECK(report.rows[0].total_us() > 0.0);
  std::ostringstream os;
  write_bench(os, report);
  std::istringstream in(os.str());
  std::string header, row, rest;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "geometry,m,n,p,lift_us,project_us,connection_us,total_us");
  CHECK(row.rfind("balanced,30,30,3,", 0) == 0);
  CHECK_FALSE(std::getline(in, rest));
}

TEST_CASE("sweeps produce fits for both geometries") {
  BenchConfig cfg;
  cfg.sizes = {40, 80};
  cfg.p = 2;
  cfg.ps = {1, 2, 3};
  cfg.size = 40;
  cfg.repeats = 1;
  cfg.min_batch_ms = 0.5;
  const BenchReport report = run_bench(cfg);
  CHECK(report.rows.size() == 2 * 4);  // (40,2) is shared by both sweeps
  CHECK(report.fits.size() == 4);
  for (const auto& f : report.fits) CHECK(std::isfinite(f.exponent));
  cfg.ps = {30};
  CHECK_THROWS_AS(run_bench(cfg), DimensionError);
}
