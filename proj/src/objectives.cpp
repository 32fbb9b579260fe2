#include "fixedrank/objectives.hpp"

#include <algorithm>
#include <sstream>

#include "fixedrank/errors.hpp"
#include "fixedrank/kernels.hpp"

namespace fixedrank {

namespace {

void require_factors(const EuclideanOracle& o, const FactorPair& x) {
  if (x.m.rows() != o.rows() || x.n.rows() != o.cols() || x.m.cols() != x.n.cols()) {
    throw DimensionError("objective: factor dimensions do not match the objective");
  }
}

class ApproximationOracle final : public EuclideanOracle {
 public:
  explicit ApproximationOracle(Matrix a) : a_(std::move(a)) {
    if (a_.size() == 0 || !a_.allFinite()) {
      throw DimensionError("approximation objective: target must be non-empty and finite");
    }
  }

  Eigen::Index rows() const override { return a_.rows(); }
  Eigen::Index cols() const override { return a_.cols(); }

  double value(const FactorPair& x) const override {
    require_factors(*this, x);
    return 0.5 * (x.m * x.n.transpose() - a_).squaredNorm();
  }

  Matrix grad_right(const FactorPair& x, const Matrix& v) const override {
    require_factors(*this, x);
    return x.m * (x.n.transpose() * v) - a_ * v;
  }

  Matrix grad_left(const FactorPair& x, const Matrix& u) const override {
    require_factors(*this, x);
    return x.n * (x.m.transpose() * u) - a_.transpose() * u;
  }

  Matrix hess_right(const FactorPair& x, const FactorPair& dir, const Matrix& v) const override {
    require_factors(*this, x);
    return dir.m * (x.n.transpose() * v) + x.m * (dir.n.transpose() * v);
  }

  Matrix hess_left(const FactorPair& x, const FactorPair& dir, const Matrix& u) const override {
    require_factors(*this, x);
    return x.n * (dir.m.transpose() * u) + dir.n * (x.m.transpose() * u);
  }

 private:
  Matrix a_;
};

// All products run over the observed entries only: O(|Ω|·k) per call.
class CompletionOracle final : public EuclideanOracle {
 public:
  explicit CompletionOracle(CompletionObjective obj) : obj_(std::move(obj)) {}

  Eigen::Index rows() const override { return obj_.rows(); }
  Eigen::Index cols() const override { return obj_.cols(); }

  double value(const FactorPair& x) const override {
    require_factors(*this, x);
    double acc = 0.0;
    for (const Entry& e : obj_.entries()) {
      const double r = x.m.row(e.row).dot(x.n.row(e.col)) - e.value;
      acc += r * r;
    }
    return 0.5 * acc;
  }

  Matrix grad_right(const FactorPair& x, const Matrix& v) const override {
    require_factors(*this, x);
    Matrix out = Matrix::Zero(rows(), v.cols());
    for (const Entry& e : obj_.entries()) {
      const double r = x.m.row(e.row).dot(x.n.row(e.col)) - e.value;
      out.row(e.row) += r * v.row(e.col);
    }
    return out;
  }

  Matrix grad_left(const FactorPair& x, const Matrix& u) const override {
    require_factors(*this, x);
    Matrix out = Matrix::Zero(cols(), u.cols());
    for (const Entry& e : obj_.entries()) {
      const double r = x.m.row(e.row).dot(x.n.row(e.col)) - e.value;
      out.row(e.col) += r * u.row(e.row);
    }
    return out;
  }

  Matrix hess_right(const FactorPair& x, const FactorPair& dir, const Matrix& v) const override {
    require_factors(*this, x);
    Matrix out = Matrix::Zero(rows(), v.cols());
    for (const Entry& e : obj_.entries()) {
      const double d = dir.m.row(e.row).dot(x.n.row(e.col)) + x.m.row(e.row).dot(dir.n.row(e.col));
      out.row(e.row) += d * v.row(e.col);
    }
    return out;
  }

  Matrix hess_left(const FactorPair& x, const FactorPair& dir, const Matrix& u) const override {
    require_factors(*this, x);
    Matrix out = Matrix::Zero(cols(), u.cols());
    for (const Entry& e : obj_.entries()) {
      const double d = dir.m.row(e.row).dot(x.n.row(e.col)) + x.m.row(e.row).dot(dir.n.row(e.col));
      out.row(e.col) += d * u.row(e.row);
    }
    return out;
  }

 private:
  CompletionObjective obj_;
};

}  // namespace

CompletionObjective::CompletionObjective(Eigen::Index rows, Eigen::Index cols,
                                         std::vector<Entry> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (rows_ <= 0 || cols_ <= 0) {
    throw DimensionError("completion objective: dimensions must be positive");
  }
  if (entries_.empty()) {
    throw DimensionError("completion objective: the sampling set is empty");
  }
  for (const Entry& e : entries_) {
    if (e.row < 0 || e.row >= rows_ || e.col < 0 || e.col >= cols_) {
      std::ostringstream os;
      os << "completion objective: entry (" << e.row << ", " << e.col << ") out of range";
      throw DimensionError(os.str());
    }
  }
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t k = 1; k < entries_.size(); ++k) {
    if (entries_[k].row == entries_[k - 1].row && entries_[k].col == entries_[k - 1].col) {
      std::ostringstream os;
      os << "completion objective: duplicate entry (" << entries_[k].row << ", "
         << entries_[k].col << ")";
      throw DimensionError(os.str());
    }
  }
}

std::shared_ptr<const EuclideanOracle> approx_oracle(ApproximationObjective obj) {
  return std::make_shared<ApproximationOracle>(std::move(obj.a));
}

std::shared_ptr<const EuclideanOracle> completion_oracle(CompletionObjective obj) {
  return std::make_shared<CompletionOracle>(std::move(obj));
}

VectorField gradient_field_balanced(std::shared_ptr<const EuclideanOracle> oracle) {
  VectorField f;
  f.value = [oracle](const FactorPair& x) {
    FactorPair y;
    y.m = oracle->grad_right(x, x.n) * (x.m.transpose() * x.m);
    y.n = oracle->grad_left(x, x.m) * (x.n.transpose() * x.n);
    return y;
  };
  // Product rule on G(MNᵀ)·N·MᵀM and G(MNᵀ)ᵀ·M·NᵀN.
  f.derivative = [oracle](const FactorPair& x, const FactorPair& d) {
    const Matrix gm = x.m.transpose() * x.m;
    const Matrix gn = x.n.transpose() * x.n;
    const Matrix dgm = d.m.transpose() * x.m + x.m.transpose() * d.m;
    const Matrix dgn = d.n.transpose() * x.n + x.n.transpose() * d.n;
    FactorPair dy;
    dy.m = (oracle->hess_right(x, d, x.n) + oracle->grad_right(x, d.n)) * gm +
           oracle->grad_right(x, x.n) * dgm;
    dy.n = (oracle->hess_left(x, d, x.m) + oracle->grad_left(x, d.m)) * gn +
           oracle->grad_left(x, x.m) * dgn;
    return dy;
  };
  return f;
}

VectorField gradient_field_stiefel(std::shared_ptr<const EuclideanOracle> oracle) {
  using kernels::sym;
  VectorField f;
  f.value = [oracle](const FactorPair& x) {
    const Matrix b = oracle->grad_right(x, x.n);
    return FactorPair{b - x.m * sym(x.m.transpose() * b), oracle->grad_left(x, x.m)};
  };
  f.derivative = [oracle](const FactorPair& x, const FactorPair& d) {
    const Matrix b = oracle->grad_right(x, x.n);
    const Matrix db = oracle->hess_right(x, d, x.n) + oracle->grad_right(x, d.n);
    FactorPair dy;
    dy.m = db - d.m * sym(x.m.transpose() * b) -
           x.m * sym(d.m.transpose() * b + x.m.transpose() * db);
    dy.n = oracle->hess_left(x, d, x.m) + oracle->grad_left(x, d.m);
    return dy;
  };
  return f;
}

}  // namespace fixedrank
