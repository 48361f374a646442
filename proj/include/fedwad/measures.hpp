#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fedwad {

/// Row-major double matrix; one support point per row everywhere in the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kSimplexTolerance = 1e-9;

/// Weighted point cloud sum_i a_i delta_{x_i}. Immutable after construction.
class DiscreteMeasure {
 public:
  /// Wraps points and weights that are already on the simplex (|sum - 1| <= 1e-9).
  /// Nothing is rescaled, so the stored bits are exactly the inputs (subnormals
  /// are flushed to zero).
  static DiscreteMeasure from_normalized(Matrix points, Vector weights);

  const Matrix& points() const noexcept { return points_; }
  const Vector& weights() const noexcept { return weights_; }
  Index size() const noexcept { return points_.rows(); }
  Index dim() const noexcept { return points_.cols(); }
  double weight(Index i) const { return weights_[i]; }
  auto point(Index i) const { return points_.row(i); }

  /// Per-coordinate [min, max] over the support.
  std::pair<Vector, Vector> bounds() const;

  bool operator==(const DiscreteMeasure& other) const;

 private:
  DiscreteMeasure(Matrix points, Vector weights)
      : points_(std::move(points)), weights_(std::move(weights)) {}

  Matrix points_;
  Vector weights_;
};

/// Builds a measure, defaulting to uniform weights and rescaling positive
/// weights onto the simplex when they are not already within tolerance.
DiscreteMeasure new_discrete(Matrix points, std::optional<Vector> weights = std::nullopt);

struct GaussianMeasure {
  Vector mean;
  Matrix covariance;

  /// Validates symmetry (1e-9) and nonnegative diagonal.
  GaussianMeasure(Vector mean, Matrix covariance);
  Index dim() const noexcept { return mean.size(); }
};

/// Lower-triangular factor L with L L^T = cov. Zero pivots of semidefinite
/// matrices yield zero columns; a 1e-12 diagonal jitter is retried before
/// reporting NonPsdCovariance.
Matrix psd_cholesky(const Matrix& cov);

DiscreteMeasure sample_gaussian(const GaussianMeasure& g, Index n, std::uint64_t seed);

struct ClassStats {
  Vector mean;
  Matrix covariance;  // population covariance (divides by the class count)
  Index count = 0;
};

class LabeledDataset {
 public:
  /// Computes per-label statistics from the raw samples.
  LabeledDataset(Matrix features, std::vector<int> labels);

  const Matrix& features() const noexcept { return features_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::map<int, ClassStats>& class_stats() const noexcept { return stats_; }
  Index size() const noexcept { return features_.rows(); }
  Index dim() const noexcept { return features_.cols(); }

  /// Uniform-weight measure over the features.
  DiscreteMeasure as_measure() const;
  /// Rows selected by index, statistics recomputed.
  LabeledDataset subset(std::span<const Index> rows) const;

 private:
  Matrix features_;
  std::vector<int> labels_;
  std::map<int, ClassStats> stats_;
};

std::map<int, ClassStats> compute_class_stats(const Matrix& features, std::span<const int> labels);

/// One isotropic Gaussian blob per class mean; labels 0..C-1 in class order.
LabeledDataset make_synthetic_labeled(const std::vector<Vector>& class_means, Index per_class_n,
                                      double noise_scale, std::uint64_t seed);

// CSV: header row, d coordinate columns, optional trailing "weight" column.
DiscreteMeasure read_measure_csv(const std::filesystem::path& path);
void write_measure_csv(const std::filesystem::path& path, const DiscreteMeasure& m);
DiscreteMeasure parse_measure_csv(const std::string& text);
std::string format_measure_csv(const DiscreteMeasure& m);

// Labeled CSV: header row, d feature columns, trailing integer "label" column.
LabeledDataset read_labeled_csv(const std::filesystem::path& path);
void write_labeled_csv(const std::filesystem::path& path, const LabeledDataset& ds);

// Binary .fwm: exactly the wire measure blob.
DiscreteMeasure read_measure_fwm(const std::filesystem::path& path);
void write_measure_fwm(const std::filesystem::path& path, const DiscreteMeasure& m);

}  // namespace fedwad
