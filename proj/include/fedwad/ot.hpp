#pragma once

#include <vector>

#include "fedwad/measures.hpp"

namespace fedwad {

/// Pairwise ground costs C_ij = ||x_i - x'_j||_2^p.
struct CostMatrix {
  Matrix values;
  int order = 2;
};

/// Only p = 1 and p = 2 are supported.
CostMatrix cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p);
CostMatrix cost_matrix(const Matrix& x, const Matrix& y, int p);

struct PlanEntry {
  Index i = 0;
  Index j = 0;
  double mass = 0.0;
};

/// Sparse optimal coupling. Entries are sorted by (i, j); masses below 1e-12
/// are pruned, so nnz() <= rows + cols - 1 for solver output.
struct TransportPlan {
  Index rows = 0;
  Index cols = 0;
  std::vector<PlanEntry> entries;
  double objective = 0.0;  // <C, P>
  Vector row_marginal;
  Vector col_marginal;
  int order = 2;

  Index nnz() const noexcept { return static_cast<Index>(entries.size()); }
  Matrix dense() const;
};

inline constexpr double kPlanPruneThreshold = 1e-12;

/// Exact OT by a network simplex on the transportation graph.
/// Throws Infeasible when |sum a - sum b| > 1e-9 and NumericalFailure after
/// 100 * n * m pivots.
TransportPlan solve_exact(const Vector& a, const Vector& b, const CostMatrix& cost);

/// Independent brute-force optimum. Splits atoms into equal 1/Q masses for the
/// smallest Q <= 10 that makes every weight an integer multiple of 1/Q (within
/// 1e-9), then enumerates all Q! assignments.
double oracle_cost(const Vector& a, const Vector& b, const CostMatrix& cost);

/// W_p(mu, nu) = <C, P*>^(1/p).
double wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p);

/// Solves OT between two measures under the order-p cost.
TransportPlan optimal_plan(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p);

enum class Side { Left, Right };

/// Gradient of <C, P> with respect to the support of one side, holding the
/// (optimal) plan fixed; squared Euclidean cost only.
///   left:  row i = 2 (a_i x_i  - (P X')_i)
///   right: row j = 2 (b_j x'_j - (P^T X)_j)
Matrix grad_support(const TransportPlan& plan, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                    Side side);

}  // namespace fedwad
