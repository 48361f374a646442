// Primal network simplex for the uncapacitated transportation problem.
//
// The spanning-tree bookkeeping (thread / rev_thread / succ_num / last_succ)
// follows the LEMON NetworkSimplex layout. Degenerate pivots are kept finite by
// maintaining a strongly feasible tree: on ties the leaving arc is the last
// blocking arc met when walking the cycle in its orientation. Arcs of the
// complete bipartite graph are implicit (arc e runs from source e / m to sink
// e % m), and because arcs are uncapacitated a non-tree arc always carries zero
// flow, so flow is stored per tree node instead of per arc.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "fedwad/error.hpp"
#include "fedwad/ot.hpp"

namespace fedwad {
namespace {

constexpr signed char kUp = 1;     // pred arc points node -> parent
constexpr signed char kDown = -1;  // pred arc points parent -> node
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kReducedCostEps = 1e-13;

class TransportSimplex {
 public:
  TransportSimplex(const Vector& a, const Vector& b, const Matrix& cost)
      : n_(static_cast<int>(a.size())),
        m_(static_cast<int>(b.size())),
        node_num_(n_ + m_),
        root_(node_num_),
        arc_num_(static_cast<std::int64_t>(n_) * m_),
        cost_(cost.data()) {
    const int all = node_num_ + 1;
    parent_.assign(all, -1);
    pred_.assign(all, -1);
    thread_.assign(all, 0);
    rev_thread_.assign(all, 0);
    succ_num_.assign(all, 0);
    last_succ_.assign(all, 0);
    pred_dir_.assign(all, kUp);
    pi_.assign(all, 0.0);
    flow_.assign(all, 0.0);
    art_up_.assign(node_num_, 1);

    double max_cost = 0.0;
    for (std::int64_t e = 0; e < arc_num_; ++e) max_cost = std::max(max_cost, std::abs(cost_[e]));
    art_cost_ = (max_cost + 1.0) * node_num_;

    supply_.assign(node_num_, 0.0);
    auto& supply = supply_;
    for (int i = 0; i < n_; ++i) supply[i] = a[i];
    for (int j = 0; j < m_; ++j) supply[n_ + j] = -b[j];

    parent_[root_] = -1;
    pred_[root_] = -1;
    thread_[root_] = 0;
    rev_thread_[0] = root_;
    succ_num_[root_] = node_num_ + 1;
    last_succ_[root_] = root_ - 1;
    pi_[root_] = 0.0;
    for (int u = 0; u < node_num_; ++u) {
      parent_[u] = root_;
      pred_[u] = arc_num_ + u;
      thread_[u] = u + 1;
      rev_thread_[u + 1] = u;
      succ_num_[u] = 1;
      last_succ_[u] = u;
      if (supply[u] >= 0.0) {
        art_up_[u] = 1;
        pred_dir_[u] = kUp;
        pi_[u] = 0.0;
        flow_[u] = supply[u];
      } else {
        art_up_[u] = 0;
        pred_dir_[u] = kDown;
        pi_[u] = art_cost_;
        flow_[u] = -supply[u];
      }
    }

    const auto sqrt_arcs = static_cast<std::int64_t>(std::sqrt(static_cast<double>(arc_num_)));
    block_size_ = std::max<std::int64_t>(sqrt_arcs, 10);
  }

  void run(std::int64_t max_iterations) {
    std::int64_t iterations = 0;
    while (find_entering_arc()) {
      if (++iterations > max_iterations) {
        throw Error(ErrorCode::NumericalFailure,
                    "network simplex exceeded " + std::to_string(max_iterations) + " pivots");
      }
      find_join_node();
      find_leaving_arc();
      if (!(delta_ < kInf)) throw Error(ErrorCode::NumericalFailure, "unbounded pivot cycle");
      change_flow();
      update_tree_structure();
      update_potential();
    }
  }

  // Pivoting accumulates rounding in every flow it touches. On the final tree
  // each arc's flow is the supply of the subtree below it, so recompute it that
  // way: an arc into a leaf then carries that leaf's weight exactly, and any
  // imbalance between the inputs ends up on the artificial arcs.
  void recompute_flows() {
    std::vector<int> preorder;
    preorder.reserve(static_cast<std::size_t>(node_num_) + 1);
    int u = root_;
    for (int k = 0; k <= node_num_; ++k) {
      preorder.push_back(u);
      u = thread_[u];
    }
    std::vector<long double> subtree(supply_.begin(), supply_.end());
    subtree.push_back(0.0L);
    for (auto it = preorder.rbegin(); it != preorder.rend(); ++it) {
      const int v = *it;
      if (v == root_) continue;
      subtree[static_cast<std::size_t>(parent_[v])] += subtree[static_cast<std::size_t>(v)];
      const long double f = pred_dir_[v] == kUp ? subtree[static_cast<std::size_t>(v)]
                                                : -subtree[static_cast<std::size_t>(v)];
      flow_[v] = f > 0.0L ? static_cast<double>(f) : 0.0;
    }
  }

  /// Flow on tree arcs that connect a source to a sink.
  template <typename Fn>
  void for_each_basic_flow(Fn&& fn) const {
    for (int u = 0; u < node_num_; ++u) {
      const std::int64_t e = pred_[u];
      if (e >= 0 && e < arc_num_) fn(static_cast<Index>(e / m_), static_cast<Index>(e % m_), flow_[u]);
    }
  }

  double max_artificial_flow() const {
    double worst = 0.0;
    for (int u = 0; u < node_num_; ++u) {
      if (pred_[u] >= arc_num_) worst = std::max(worst, flow_[u]);
    }
    return worst;
  }

 private:
  int source(std::int64_t e) const {
    if (e < arc_num_) return static_cast<int>(e / m_);
    const int u = static_cast<int>(e - arc_num_);
    return art_up_[u] ? u : root_;
  }
  int target(std::int64_t e) const {
    if (e < arc_num_) return n_ + static_cast<int>(e % m_);
    const int u = static_cast<int>(e - arc_num_);
    return art_up_[u] ? root_ : u;
  }
  double cost(std::int64_t e) const {
    if (e < arc_num_) return cost_[e];
    return art_up_[static_cast<int>(e - arc_num_)] ? 0.0 : art_cost_;
  }

  // Block search pricing over the real arcs.
  bool find_entering_arc() {
    double best = 0.0;
    std::int64_t count = block_size_;
    std::int64_t e = next_arc_;
    int i = static_cast<int>(e / m_);
    int j = static_cast<int>(e % m_);
    for (std::int64_t scanned = 0; scanned < arc_num_; ++scanned) {
      const double pi_i = pi_[i];
      const double pi_j = pi_[n_ + j];
      const double c = cost_[e] + pi_i - pi_j;
      if (c < best) {
        const double scale = std::max({std::abs(cost_[e]), std::abs(pi_i), std::abs(pi_j), 1.0});
        if (c < -kReducedCostEps * scale) {
          best = c;
          in_arc_ = e;
        }
      }
      ++e;
      if (++j == m_) {
        j = 0;
        if (++i == n_) {
          i = 0;
          e = 0;
        }
      }
      if (--count == 0) {
        if (best < 0.0) {
          next_arc_ = e;
          return true;
        }
        count = block_size_;
      }
    }
    if (best < 0.0) {
      next_arc_ = e;
      return true;
    }
    return false;
  }

  void find_join_node() {
    int u = source(in_arc_);
    int v = target(in_arc_);
    while (u != v) {
      if (succ_num_[u] < succ_num_[v]) {
        u = parent_[u];
      } else {
        v = parent_[v];
      }
    }
    join_ = u;
  }

  void find_leaving_arc() {
    const int first = source(in_arc_);
    const int second = target(in_arc_);
    delta_ = kInf;
    int result = 0;
    for (int u = first; u != join_; u = parent_[u]) {
      const double d = pred_dir_[u] == kUp ? flow_[u] : kInf;
      if (d < delta_) {
        delta_ = d;
        u_out_ = u;
        result = 1;
      }
    }
    for (int u = second; u != join_; u = parent_[u]) {
      const double d = pred_dir_[u] == kDown ? flow_[u] : kInf;
      if (d <= delta_) {
        delta_ = d;
        u_out_ = u;
        result = 2;
      }
    }
    if (result == 1) {
      u_in_ = first;
      v_in_ = second;
    } else {
      u_in_ = second;
      v_in_ = first;
    }
  }

  void change_flow() {
    if (delta_ > 0.0) {
      for (int u = source(in_arc_); u != join_; u = parent_[u]) flow_[u] -= pred_dir_[u] * delta_;
      for (int u = target(in_arc_); u != join_; u = parent_[u]) flow_[u] += pred_dir_[u] * delta_;
    }
    flow_[u_out_] = 0.0;
  }

  void update_tree_structure() {
    const int old_rev_thread = rev_thread_[u_out_];
    const int old_succ_num = succ_num_[u_out_];
    const int old_last_succ = last_succ_[u_out_];
    v_out_ = parent_[u_out_];
    const double in_flow = delta_;

    if (u_in_ == u_out_) {
      parent_[u_in_] = v_in_;
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source(in_arc_) ? kUp : kDown;
      flow_[u_in_] = in_flow;

      if (thread_[v_in_] != u_out_) {
        int after = thread_[old_last_succ];
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
        after = thread_[v_in_];
        thread_[v_in_] = u_out_;
        rev_thread_[u_out_] = v_in_;
        thread_[old_last_succ] = after;
        rev_thread_[after] = old_last_succ;
      }
    } else {
      // When old_rev_thread == v_in, join and v_out coincide.
      const int thread_continue =
          old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];

      // Re-hang the stem nodes between u_in and u_out.
      int stem = u_in_;
      int par_stem = v_in_;
      int last = last_succ_[u_in_];
      int after = thread_[last];
      thread_[v_in_] = u_in_;
      dirty_revs_.clear();
      dirty_revs_.push_back(v_in_);
      while (stem != u_out_) {
        const int next_stem = parent_[stem];
        thread_[last] = next_stem;
        dirty_revs_.push_back(last);

        const int before = rev_thread_[stem];
        thread_[before] = after;
        rev_thread_[after] = before;

        parent_[stem] = par_stem;
        par_stem = stem;
        stem = next_stem;

        last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
        after = thread_[last];
      }
      parent_[u_out_] = par_stem;
      thread_[last] = thread_continue;
      rev_thread_[thread_continue] = last;
      last_succ_[u_out_] = last;

      if (old_rev_thread != v_in_) {
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
      }

      for (const int u : dirty_revs_) rev_thread_[thread_[u]] = u;

      // Shift pred arcs (and their flows) one step along the reversed stem.
      int tmp_sc = 0;
      const int tmp_ls = last_succ_[u_out_];
      for (int u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
        pred_[u] = pred_[p];
        pred_dir_[u] = static_cast<signed char>(-pred_dir_[p]);
        flow_[u] = flow_[p];
        tmp_sc += succ_num_[u] - succ_num_[p];
        succ_num_[u] = tmp_sc;
        last_succ_[p] = tmp_ls;
      }
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source(in_arc_) ? kUp : kDown;
      flow_[u_in_] = in_flow;
      succ_num_[u_in_] = old_succ_num;
    }

    const int up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
    const int last_succ_out = last_succ_[u_out_];
    for (int u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) {
      last_succ_[u] = last_succ_out;
    }

    if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
        last_succ_[u] = old_rev_thread;
      }
    } else if (last_succ_out != old_last_succ) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
        last_succ_[u] = last_succ_out;
      }
    }

    for (int u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
    for (int u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
  }

  void update_potential() {
    const double sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * cost(in_arc_);
    const int end = thread_[last_succ_[u_in_]];
    for (int u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
  }

  int n_;
  int m_;
  int node_num_;
  int root_;
  std::int64_t arc_num_;
  const double* cost_;
  double art_cost_ = 0.0;

  std::vector<int> parent_;
  std::vector<std::int64_t> pred_;
  std::vector<int> thread_;
  std::vector<int> rev_thread_;
  std::vector<int> succ_num_;
  std::vector<int> last_succ_;
  std::vector<signed char> pred_dir_;
  std::vector<double> pi_;
  std::vector<double> flow_;
  std::vector<char> art_up_;
  std::vector<int> dirty_revs_;
  std::vector<double> supply_;

  std::int64_t block_size_ = 10;
  std::int64_t next_arc_ = 0;
  std::int64_t in_arc_ = 0;
  int join_ = 0;
  int u_in_ = 0;
  int v_in_ = 0;
  int u_out_ = 0;
  int v_out_ = 0;
  double delta_ = 0.0;
};

void check_marginal(const Vector& w, const char* name) {
  if (w.size() < 1) throw Error(ErrorCode::ShapeMismatch, std::string(name) + " is empty");
  if (!w.allFinite()) throw Error(ErrorCode::NonFiniteValue, std::string(name) + " not finite");
  if ((w.array() < 0.0).any()) throw Error(ErrorCode::NegativeWeight, std::string(name) + " < 0");
}

}  // namespace

namespace {

// Recomputes the kept flows from the marginals, one connected component of
// the pruned support at a time. On the full basis tree every flow is a partial
// sum of marginal mismatches along a long path of degenerate arcs, so rounding
// noise in a and b compounds into the plan (and, over repeated interpolation,
// into dust atoms). Within a component only local mismatches enter; the
// component's residual lands on its root.
void settle_forest(std::vector<PlanEntry>& entries, const Vector& a, const Vector& b) {
  const Index n = a.size();
  const Index nodes = n + b.size();
  std::vector<std::vector<std::size_t>> adj(static_cast<std::size_t>(nodes));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    adj[static_cast<std::size_t>(entries[k].i)].push_back(k);
    adj[static_cast<std::size_t>(n + entries[k].j)].push_back(k);
  }
  auto supply = [&](Index v) -> long double { return v < n ? a[v] : -b[v - n]; };

  std::vector<Index> order;
  std::vector<std::size_t> parent_arc(static_cast<std::size_t>(nodes), entries.size());
  std::vector<bool> seen(static_cast<std::size_t>(nodes), false);
  std::vector<long double> subtree(static_cast<std::size_t>(nodes), 0.0L);
  for (Index root = 0; root < nodes; ++root) {
    if (seen[static_cast<std::size_t>(root)] || adj[static_cast<std::size_t>(root)].empty()) continue;
    order.clear();
    order.push_back(root);
    seen[static_cast<std::size_t>(root)] = true;
    for (std::size_t h = 0; h < order.size(); ++h) {
      const Index v = order[h];
      for (const std::size_t k : adj[static_cast<std::size_t>(v)]) {
        const Index w = v < n ? n + entries[k].j : entries[k].i;
        if (seen[static_cast<std::size_t>(w)]) continue;
        seen[static_cast<std::size_t>(w)] = true;
        parent_arc[static_cast<std::size_t>(w)] = k;
        order.push_back(w);
      }
    }
    for (const Index v : order) subtree[static_cast<std::size_t>(v)] = supply(v);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const Index v = *it;
      if (v == root) continue;
      const std::size_t k = parent_arc[static_cast<std::size_t>(v)];
      const long double s = subtree[static_cast<std::size_t>(v)];
      const Index up = v < n ? n + entries[k].j : entries[k].i;
      subtree[static_cast<std::size_t>(up)] += s;
      // A source child pushes its surplus up the arc; a sink child draws it.
      const long double f = v < n ? s : -s;
      entries[k].mass = f > 0.0L ? static_cast<double>(f) : 0.0;
    }
  }
  std::erase_if(entries, [](const PlanEntry& e) { return e.mass < kPlanPruneThreshold; });
}

}  // namespace

TransportPlan solve_exact(const Vector& a, const Vector& b, const CostMatrix& cost) {
  check_marginal(a, "a");
  check_marginal(b, "b");
  if (cost.values.rows() != a.size() || cost.values.cols() != b.size()) {
    throw Error(ErrorCode::ShapeMismatch, "cost matrix shape does not match the marginals");
  }
  if (!cost.values.allFinite()) throw Error(ErrorCode::NonFiniteValue, "cost matrix not finite");
  if (std::abs(a.sum() - b.sum()) > kSimplexTolerance) {
    throw Error(ErrorCode::Infeasible, "marginal masses differ: " + std::to_string(a.sum()) +
                                           " vs " + std::to_string(b.sum()));
  }

  const Index n = a.size();
  const Index m = b.size();
  TransportSimplex simplex(a, b, cost.values);
  simplex.run(100 * static_cast<std::int64_t>(n) * m + 100);
  simplex.recompute_flows();
  if (simplex.max_artificial_flow() > kSimplexTolerance) {
    throw Error(ErrorCode::Infeasible, "artificial arcs still carry flow at optimum");
  }

  TransportPlan plan;
  plan.rows = n;
  plan.cols = m;
  plan.order = cost.order;
  simplex.for_each_basic_flow([&](Index i, Index j, double mass) {
    if (mass >= kPlanPruneThreshold) plan.entries.push_back({i, j, mass});
  });
  settle_forest(plan.entries, a, b);
  std::sort(plan.entries.begin(), plan.entries.end(), [](const PlanEntry& x, const PlanEntry& y) {
    return x.i != y.i ? x.i < y.i : x.j < y.j;
  });
  plan.row_marginal = Vector::Zero(n);
  plan.col_marginal = Vector::Zero(m);
  double objective = 0.0;
  for (const auto& e : plan.entries) {
    plan.row_marginal[e.i] += e.mass;
    plan.col_marginal[e.j] += e.mass;
    objective += e.mass * cost.values(e.i, e.j);
  }
  plan.objective = objective;
  return plan;
}

}  // namespace fedwad
