#include "fixedrank/kernels.hpp"

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "fixedrank/errors.hpp"

namespace fixedrank::kernels {

namespace {

void require_square(const Matrix& z, const char* what) {
  if (z.rows() != z.cols() || z.size() == 0) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << z.rows() << "x" << z.cols();
    throw DimensionError(os.str());
  }
}

}  // namespace

Matrix sym(const Matrix& z) {
  require_square(z, "sym");
  return 0.5 * (z + z.transpose());
}

Matrix skew(const Matrix& z) {
  require_square(z, "skew");
  return 0.5 * (z - z.transpose());
}

Matrix sylvester_solve(const Matrix& a, const Matrix& b, const Matrix& c) {
  require_square(a, "sylvester_solve(A)");
  require_square(b, "sylvester_solve(B)");
  const Eigen::Index p = a.rows();
  if (b.rows() != p || c.rows() != p || c.cols() != p) {
    throw DimensionError("sylvester_solve: A, B, C must share one square size");
  }

  // Column-major vec: vec(A·K) = (I⊗A)vec(K), vec(K·B) = (Bᵀ⊗I)vec(K).
  const Eigen::Index q = p * p;
  Matrix sys = Matrix::Zero(q, q);
  for (Eigen::Index j = 0; j < p; ++j) {
    sys.block(j * p, j * p, p, p) += a;
    for (Eigen::Index i = 0; i < p; ++i) {
      sys.block(j * p, i * p, p, p).diagonal().array() += b(i, j);
    }
  }

  Eigen::PartialPivLU<Matrix> lu(sys);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    std::ostringstream os;
    os << "Sylvester unsolvable: reciprocal condition estimate " << rcond;
    throw SylvesterError(os.str(), rcond > 0.0 ? 1.0 / rcond : INFINITY);
  }
  const Vector rhs = Eigen::Map<const Vector>(c.data(), q);
  const Vector k = lu.solve(rhs);
  if (!k.allFinite()) {
    throw SylvesterError("Sylvester unsolvable: non-finite solution", INFINITY);
  }
  return Eigen::Map<const Matrix>(k.data(), p, p);
}

Matrix matrix_exp(const Matrix& z) {
  require_square(z, "matrix_exp");
  return z.exp();
}

QrFactors qr_positive(const Matrix& m) {
  const Eigen::Index rows = m.rows();
  const Eigen::Index p = m.cols();
  if (p == 0 || rows < p) {
    throw DimensionError("qr_positive: expected m >= p > 0");
  }
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, p);
  Matrix r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();

  const double scale = m.norm();
  for (Eigen::Index i = 0; i < p; ++i) {
    const double d = r(i, i);
    if (!(std::abs(d) >= 1e-12 * scale) || scale == 0.0) {
      throw RankError("qr_positive: matrix is numerically rank deficient");
    }
    if (d < 0.0) {
      q.col(i) *= -1.0;
      r.row(i) *= -1.0;
    }
  }
  return {std::move(q), std::move(r)};
}

}  // namespace fixedrank::kernels
