#include "fedwad/apps/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "fedwad/error.hpp"
#include "fedwad/rng.hpp"

namespace fedwad::apps {
namespace {

constexpr unsigned kRestarts = 20;
constexpr double kDegreeFloor = 1e-12;

double median_off_diagonal(const Matrix& d) {
  std::vector<double> v;
  for (Index i = 0; i < d.rows(); ++i) {
    for (Index j = 0; j < d.cols(); ++j) {
      if (i != j) v.push_back(d(i, j));
    }
  }
  if (v.empty()) return 1.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m > 0.0 ? m : 1.0;
}

Matrix affinity(const Matrix& d, const ClusterMode& mode) {
  const Index c = d.rows();
  if (std::holds_alternative<AffinityMode>(mode)) {
    const double scale = median_off_diagonal(d);
    return (-d.array() / scale).exp().matrix();
  }
  const Index nn = std::get<KnnMode>(mode).neighbors;
  if (nn < 1) throw Error(ErrorCode::InvalidParameter, "knn mode needs at least one neighbor");
  Matrix a = Matrix::Zero(c, c);
  for (Index i = 0; i < c; ++i) {
    std::vector<Index> order;
    for (Index j = 0; j < c; ++j) {
      if (j != i) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return d(i, x) < d(i, y); });
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(nn), order.size());
    for (std::size_t r = 0; r < take; ++r) {
      a(i, order[r]) = 1.0;
      a(order[r], i) = 1.0;
    }
  }
  return a;
}

// Relabel so that clusters are numbered by first appearance.
std::vector<int> canonical(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out;
  out.reserve(labels.size());
  for (const int l : labels) {
    const auto it = remap.try_emplace(l, static_cast<int>(remap.size())).first;
    out.push_back(it->second);
  }
  return out;
}

struct KmeansRun {
  std::vector<int> labels;
  double inertia;
};

KmeansRun kmeans_once(const Matrix& x, Index k, Rng& rng) {
  const Index n = x.rows();
  Matrix centers(k, x.cols());
  centers.row(0) = x.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector best = Vector::Constant(n, std::numeric_limits<double>::infinity());
  for (Index c = 1; c < k; ++c) {
    for (Index i = 0; i < n; ++i) best[i] = std::min(best[i], (x.row(i) - centers.row(c - 1)).squaredNorm());
    const double total = best.sum();
    Index pick = n - 1;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (Index i = 0; i < n; ++i) {
        r -= best[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = x.row(pick);
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  double inertia = 0.0;
  for (unsigned iter = 0; iter < 300; ++iter) {
    bool changed = false;
    inertia = 0.0;
    for (Index i = 0; i < n; ++i) {
      int arg = 0;
      double dist = std::numeric_limits<double>::infinity();
      for (Index c = 0; c < k; ++c) {
        const double v = (x.row(i) - centers.row(c)).squaredNorm();
        if (v < dist) {
          dist = v;
          arg = static_cast<int>(c);
        }
      }
      inertia += dist;
      if (labels[static_cast<std::size_t>(i)] != arg) {
        labels[static_cast<std::size_t>(i)] = arg;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    // Empty clusters keep their previous center.
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
  }
  return {labels, inertia};
}

}  // namespace

SymmetricEigen jacobi_eigen(const Matrix& input, double tol, unsigned max_sweeps) {
  if (input.rows() != input.cols()) throw Error(ErrorCode::ShapeMismatch, "matrix is not square");
  const Index n = input.rows();
  Matrix a = 0.5 * (input + input.transpose());
  Matrix v = Matrix::Identity(n, n);
  auto off_norm = [&] {
    double s = 0.0;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i != j) s += a(i, j) * a(i, j);
      }
    }
    return std::sqrt(s);
  };
  for (unsigned sweep = 0; sweep < max_sweeps && off_norm() >= tol; ++sweep) {
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (off_norm() >= tol) spdlog::warn("jacobi: off-diagonal norm {} after {} sweeps", off_norm(), max_sweeps);

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) < a(y, y); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (Index k = 0; k < n; ++k) {
    out.values[k] = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

std::vector<int> kmeans(const Matrix& rows, Index k, unsigned restarts, std::uint64_t seed) {
  if (k < 1 || k > rows.rows()) throw Error(ErrorCode::InvalidParameter, "k must lie in [1, rows]");
  KmeansRun best{{}, std::numeric_limits<double>::infinity()};
  for (unsigned r = 0; r < std::max(1u, restarts); ++r) {
    Rng rng(mix_seed(seed, r));
    KmeansRun run = kmeans_once(rows, k, rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return canonical(best.labels);
}

std::vector<int> spectral_cluster(const DistanceMatrix& d, Index k, const ClusterMode& mode,
                                  std::uint64_t seed) {
  const Index c = d.size();
  if (d.values.cols() != c) throw Error(ErrorCode::ShapeMismatch, "distance matrix is not square");
  if (k < 1 || k > c) {
    throw Error(ErrorCode::InvalidParameter,
                "cluster count " + std::to_string(k) + " for " + std::to_string(c) + " clients");
  }
  if (k == 1) return std::vector<int>(static_cast<std::size_t>(c), 0);

  const Matrix a = affinity(d.values, mode);
  Vector inv_sqrt(c);
  for (Index i = 0; i < c; ++i) {
    double deg = a.row(i).sum();
    if (deg < kDegreeFloor) {
      spdlog::warn("spectral_cluster: client {} is isolated in the affinity graph", i);
      deg = kDegreeFloor;
    }
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  const Matrix lap =
      Matrix::Identity(c, c) - inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  const SymmetricEigen eig = jacobi_eigen(lap);
  Matrix emb = eig.vectors.leftCols(k);
  for (Index i = 0; i < c; ++i) {
    const double norm = emb.row(i).norm();
    if (norm > 0.0) emb.row(i) /= norm;
  }
  return kmeans(emb, k, kRestarts, seed);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "label vectors differ in length");
  const auto n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra;
  std::map<int, double> rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto c2 = [](double x) { return 0.5 * x * (x - 1.0); };
  double index = 0.0;
  for (const auto& [key, v] : joint) index += c2(v);
  double sa = 0.0;
  double sb = 0.0;
  for (const auto& [key, v] : ra) sa += c2(v);
  for (const auto& [key, v] : rb) sb += c2(v);
  const double expected = n > 1.0 ? sa * sb / c2(n) : 0.0;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace fedwad::apps
