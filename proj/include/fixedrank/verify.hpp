#pragma once

// The geometry invariant battery behind `fixedrank verify`: seeded random
// instances of both factor geometries, each property reduced to its worst
// observed residual and compared against a tolerance.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fixedrank {

struct VerifyConfig {
  std::vector<Eigen::Index> ms{7, 12};
  std::vector<Eigen::Index> ns{5, 9};
  std::vector<Eigen::Index> ps{1, 2, 3};
  /// Extra (m, n, p) instances; the defaults sit on the p = min(m, n) boundary.
  std::vector<std::array<Eigen::Index, 3>> extra{{{3, 3, 3}}, {{4, 3, 3}}};
  int trials = 25;
  std::uint64_t seed = 1;

  double algebra_tol = 1e-10;     // splits, roundtrips, Sylvester, invariance
  double covariance_tol = 1e-8;   // gauge covariance of composite maps
  double fd_tol = 1e-5;           // finite-difference checks (absolute)
  double fd_step = 1e-6;
  double euclidean_min = 1e-2;    // required failure of the Euclidean metric
};

struct PropertyResult {
  std::string geometry;
  std::string name;
  double observed = 0.0;  // worst case: max residual, or min for lower bounds
  double threshold = 0.0;
  bool lower_bound = false;
  int cases = 0;

  bool passed() const { return cases > 0 && (lower_bound ? observed >= threshold : observed <= threshold); }
};

struct VerifyReport {
  std::vector<PropertyResult> properties;
  double seconds = 0.0;

  bool all_passed() const;
};

VerifyReport run_verify(const VerifyConfig& cfg);

}  // namespace fixedrank
