#pragma once

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "fedwad/apps/otdd.hpp"

namespace fedwad::apps {

struct AffinityMode {};
struct KnnMode {
  Index neighbors = 3;
};
using ClusterMode = std::variant<AffinityMode, KnnMode>;

/// Normalized spectral clustering of a distance matrix.
///   affinity: A_ij = exp(-D_ij / median off-diagonal D)
///   knn:      A_ij = 1 iff j is among the nearest neighbors of i or vice versa
std::vector<int> spectral_cluster(const DistanceMatrix& d, Index k, const ClusterMode& mode,
                                  std::uint64_t seed);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues ascending; eigenvectors are the columns.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};
SymmetricEigen jacobi_eigen(const Matrix& a, double tol = 1e-10, unsigned max_sweeps = 100);

/// k-means++ seeding, Lloyd iterations, best inertia over `restarts`.
std::vector<int> kmeans(const Matrix& rows, Index k, unsigned restarts, std::uint64_t seed);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace fedwad::apps
