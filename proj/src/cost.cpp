#include "fedwad/error.hpp"
#include "fedwad/ot.hpp"

namespace fedwad {

CostMatrix cost_matrix(const Matrix& x, const Matrix& y, int p) {
  if (p != 1 && p != 2) {
    throw Error(ErrorCode::UnsupportedExponent, "p must be 1 or 2, got " + std::to_string(p));
  }
  if (x.cols() != y.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "dimension " + std::to_string(x.cols()) + " vs " +
                                                  std::to_string(y.cols()));
  }
  const Index n = x.rows();
  const Index m = y.rows();
  const Index d = x.cols();
  CostMatrix c{Matrix(n, m), p};
  for (Index i = 0; i < n; ++i) {
    const double* xi = x.data() + i * d;
    for (Index j = 0; j < m; ++j) {
      const double* yj = y.data() + j * d;
      double s = 0.0;
      for (Index k = 0; k < d; ++k) {
        const double diff = xi[k] - yj[k];
        s += diff * diff;
      }
      c.values(i, j) = p == 2 ? s : std::sqrt(s);
    }
  }
  return c;
}

CostMatrix cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p) {
  return cost_matrix(mu.points(), nu.points(), p);
}

Matrix TransportPlan::dense() const {
  Matrix out = Matrix::Zero(rows, cols);
  for (const auto& e : entries) out(e.i, e.j) = e.mass;
  return out;
}

}  // namespace fedwad
