#pragma once

// Seeded random matrices for synthetic experiments. Every draw comes from
// one generator so a seed fixes a whole run.

#include <cstdint>
#include <random>

#include "fixedrank/types.hpp"

namespace fixedrank {

class Random {
 public:
  explicit Random(std::uint64_t seed) : gen_(seed) {}

  double normal() { return normal_(gen_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }

  Matrix gaussian(Eigen::Index rows, Eigen::Index cols) {
    Matrix a(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = normal();
    return a;
  }

  /// Gaussian pair scaled to unit Frobenius norm.
  FactorPair unit_pair(Eigen::Index m, Eigen::Index n, Eigen::Index p) {
    FactorPair a{gaussian(m, p), gaussian(n, p)};
    return (1.0 / frobenius(a)) * a;
  }

  Matrix orthonormal(Eigen::Index rows, Eigen::Index cols) {
    Eigen::HouseholderQR<Matrix> qr(gaussian(rows, cols));
    return qr.householderQ() * Matrix::Identity(rows, cols);
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_;
};

}  // namespace fixedrank
