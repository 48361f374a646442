#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fedwad/error.hpp"
#include "fedwad/ot.hpp"

namespace fedwad {
namespace {

constexpr int kMaxSplit = 10;

// Integer multiplicities k_i with |w_i - k_i / q| <= 1e-9 and sum k_i = q, or
// an empty vector when q does not fit.
std::vector<int> split_counts(const Vector& w, int q) {
  std::vector<int> counts(static_cast<std::size_t>(w.size()));
  int total = 0;
  for (Index i = 0; i < w.size(); ++i) {
    const double scaled = w[i] * q;
    const double k = std::round(scaled);
    if (std::abs(w[i] - k / q) > 1e-9) return {};
    counts[static_cast<std::size_t>(i)] = static_cast<int>(k);
    total += static_cast<int>(k);
  }
  if (total != q) return {};
  return counts;
}

}  // namespace

double oracle_cost(const Vector& a, const Vector& b, const CostMatrix& cost) {
  if (cost.values.rows() != a.size() || cost.values.cols() != b.size()) {
    throw Error(ErrorCode::ShapeMismatch, "cost matrix shape does not match the marginals");
  }
  int q = 0;
  std::vector<int> ka;
  std::vector<int> kb;
  for (int cand = 1; cand <= kMaxSplit; ++cand) {
    ka = split_counts(a, cand);
    kb = split_counts(b, cand);
    if (!ka.empty() && !kb.empty()) {
      q = cand;
      break;
    }
  }
  if (q == 0) {
    throw Error(ErrorCode::TooLargeForOracle,
                "weights are not multiples of 1/Q for any Q <= " + std::to_string(kMaxSplit));
  }

  // Unit atoms: rows[s] is the source atom of slot s, cols holds one sink label
  // per slot. Permuting the sorted label multiset with next_permutation visits
  // every distinct assignment exactly once.
  std::vector<Index> rows;
  std::vector<Index> cols;
  for (Index i = 0; i < a.size(); ++i) rows.insert(rows.end(), ka[static_cast<std::size_t>(i)], i);
  for (Index j = 0; j < b.size(); ++j) cols.insert(cols.end(), kb[static_cast<std::size_t>(j)], j);

  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int s = 0; s < q; ++s) total += cost.values(rows[s], cols[s]);
    best = std::min(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best / q;
}

}  // namespace fedwad
