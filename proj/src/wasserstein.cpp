#include <algorithm>
#include <cmath>

#include "fedwad/error.hpp"
#include "fedwad/ot.hpp"

namespace fedwad {

TransportPlan optimal_plan(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p) {
  return solve_exact(mu.weights(), nu.weights(), cost_matrix(mu, nu, p));
}

double wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p) {
  const double objective = std::max(0.0, optimal_plan(mu, nu, p).objective);
  return p == 2 ? std::sqrt(objective) : objective;
}

Matrix grad_support(const TransportPlan& plan, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                    Side side) {
  if (plan.order != 2) {
    throw Error(ErrorCode::UnsupportedExponent, "support gradient needs the squared Euclidean cost");
  }
  if (mu.dim() != nu.dim()) throw Error(ErrorCode::DimensionMismatch, "measure dimensions differ");
  if (plan.rows != mu.size() || plan.cols != nu.size()) {
    throw Error(ErrorCode::ShapeMismatch, "plan does not match the measures");
  }
  // Use the plan's own marginals so that a pruned atom gets an exactly zero row.
  if (side == Side::Left) {
    Matrix g = Matrix::Zero(mu.size(), mu.dim());
    for (const auto& e : plan.entries) g.row(e.i) += e.mass * (mu.point(e.i) - nu.point(e.j));
    return 2.0 * g;
  }
  Matrix g = Matrix::Zero(nu.size(), nu.dim());
  for (const auto& e : plan.entries) g.row(e.j) += e.mass * (nu.point(e.j) - mu.point(e.i));
  return 2.0 * g;
}

}  // namespace fedwad
