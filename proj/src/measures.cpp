#include "fedwad/measures.hpp"

#include <cmath>
#include <set>

#include "fedwad/error.hpp"
#include "fedwad/rng.hpp"

namespace fedwad {
namespace {

void flush_and_check(double* data, Index count, const char* what) {
  for (Index i = 0; i < count; ++i) {
    if (!std::isfinite(data[i])) {
      throw Error(ErrorCode::NonFiniteValue, std::string(what) + " contains NaN or Inf");
    }
    if (std::fpclassify(data[i]) == FP_SUBNORMAL) data[i] = 0.0;
  }
}

void check_shape(const Matrix& points, Index n_weights) {
  if (points.rows() < 1 || points.cols() < 1) {
    throw Error(ErrorCode::ShapeMismatch, "a measure needs at least one point and one dimension");
  }
  if (n_weights != points.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "weights length " + std::to_string(n_weights) +
                                              " != point count " + std::to_string(points.rows()));
  }
}

}  // namespace

DiscreteMeasure DiscreteMeasure::from_normalized(Matrix points, Vector weights) {
  check_shape(points, weights.size());
  flush_and_check(points.data(), points.size(), "points");
  flush_and_check(weights.data(), weights.size(), "weights");
  if ((weights.array() < 0.0).any()) {
    throw Error(ErrorCode::NegativeWeight, "weights must be nonnegative");
  }
  const double total = weights.sum();
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    throw Error(ErrorCode::WeightInvariantViolated,
                "weights sum to " + std::to_string(total) + ", expected 1");
  }
  return DiscreteMeasure(std::move(points), std::move(weights));
}

std::pair<Vector, Vector> DiscreteMeasure::bounds() const {
  return {points_.colwise().minCoeff().transpose(), points_.colwise().maxCoeff().transpose()};
}

bool DiscreteMeasure::operator==(const DiscreteMeasure& other) const {
  return points_.rows() == other.points_.rows() && points_.cols() == other.points_.cols() &&
         points_ == other.points_ && weights_ == other.weights_;
}

DiscreteMeasure new_discrete(Matrix points, std::optional<Vector> weights) {
  const Index n = points.rows();
  Vector w = weights ? std::move(*weights) : Vector::Constant(n, n > 0 ? 1.0 / n : 0.0);
  check_shape(points, w.size());
  flush_and_check(points.data(), points.size(), "points");
  flush_and_check(w.data(), w.size(), "weights");
  if ((w.array() < 0.0).any()) {
    throw Error(ErrorCode::NegativeWeight, "weights must be nonnegative");
  }
  const double total = w.sum();
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroTotalMass, "weights sum to zero");
  if (std::abs(total - 1.0) > kSimplexTolerance) w /= total;
  return DiscreteMeasure::from_normalized(std::move(points), std::move(w));
}

GaussianMeasure::GaussianMeasure(Vector m, Matrix cov) : mean(std::move(m)), covariance(std::move(cov)) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw Error(ErrorCode::ShapeMismatch, "covariance must be d x d for a length-d mean");
  }
  if (!mean.allFinite() || !covariance.allFinite()) {
    throw Error(ErrorCode::NonFiniteValue, "gaussian parameters must be finite");
  }
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw Error(ErrorCode::NonPsdCovariance, "covariance is not symmetric");
  }
  if ((covariance.diagonal().array() < 0.0).any()) {
    throw Error(ErrorCode::NonPsdCovariance, "covariance has a negative diagonal entry");
  }
}

namespace {

std::optional<Matrix> try_cholesky(const Matrix& a) {
  const Index d = a.rows();
  const double scale = std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;
  Matrix l = Matrix::Zero(d, d);
  for (Index j = 0; j < d; ++j) {
    double pivot = a(j, j);
    for (Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (pivot < -tol) return std::nullopt;
    if (pivot <= tol) {
      // Semidefinite direction: the remainder of this column must vanish too.
      for (Index i = j + 1; i < d; ++i) {
        double r = a(i, j);
        for (Index k = 0; k < j; ++k) r -= l(i, k) * l(j, k);
        if (std::abs(r) > 1e-9 * scale) return std::nullopt;
      }
      continue;
    }
    const double root = std::sqrt(pivot);
    l(j, j) = root;
    for (Index i = j + 1; i < d; ++i) {
      double r = a(i, j);
      for (Index k = 0; k < j; ++k) r -= l(i, k) * l(j, k);
      l(i, j) = r / root;
    }
  }
  return l;
}

}  // namespace

Matrix psd_cholesky(const Matrix& cov) {
  if (auto l = try_cholesky(cov)) return *l;
  Matrix jittered = cov;
  jittered.diagonal().array() += 1e-12;
  if (auto l = try_cholesky(jittered)) return *l;
  throw Error(ErrorCode::NonPsdCovariance, "covariance is not positive semidefinite");
}

DiscreteMeasure sample_gaussian(const GaussianMeasure& g, Index n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidParameter, "sample count must be >= 1");
  const Matrix l = psd_cholesky(g.covariance);
  const Index d = g.dim();
  Rng rng(seed);
  Matrix points(n, d);
  Vector z(d);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) z[k] = rng.normal();
    points.row(i) = (g.mean + l * z).transpose();
  }
  return new_discrete(std::move(points));
}

std::map<int, ClassStats> compute_class_stats(const Matrix& features, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != features.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "one label per feature row required");
  }
  const Index d = features.cols();
  std::map<int, ClassStats> stats;
  for (Index i = 0; i < features.rows(); ++i) {
    auto& s = stats[labels[i]];
    if (s.count == 0) {
      s.mean = Vector::Zero(d);
      s.covariance = Matrix::Zero(d, d);
    }
    // Running mean: a class of identical samples reproduces the sample exactly.
    ++s.count;
    s.mean += (features.row(i).transpose() - s.mean) / static_cast<double>(s.count);
  }
  for (Index i = 0; i < features.rows(); ++i) {
    auto& s = stats[labels[i]];
    const Vector centered = features.row(i).transpose() - s.mean;
    s.covariance.noalias() += centered * centered.transpose();
  }
  for (auto& [label, s] : stats) s.covariance /= static_cast<double>(s.count);
  return stats;
}

LabeledDataset::LabeledDataset(Matrix features, std::vector<int> labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.rows() < 1 || features_.cols() < 1) {
    throw Error(ErrorCode::ShapeMismatch, "dataset must be non-empty");
  }
  if (!features_.allFinite()) throw Error(ErrorCode::NonFiniteValue, "features contain NaN or Inf");
  stats_ = compute_class_stats(features_, labels_);
}

DiscreteMeasure LabeledDataset::as_measure() const { return new_discrete(features_); }

LabeledDataset LabeledDataset::subset(std::span<const Index> rows) const {
  Matrix f(static_cast<Index>(rows.size()), dim());
  std::vector<int> l;
  l.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    f.row(static_cast<Index>(r)) = features_.row(rows[r]);
    l.push_back(labels_[rows[r]]);
  }
  return LabeledDataset(std::move(f), std::move(l));
}

LabeledDataset make_synthetic_labeled(const std::vector<Vector>& class_means, Index per_class_n,
                                      double noise_scale, std::uint64_t seed) {
  if (class_means.empty()) throw Error(ErrorCode::InvalidParameter, "need at least one class");
  if (per_class_n < 1) throw Error(ErrorCode::InvalidParameter, "per_class_n must be >= 1");
  if (noise_scale < 0.0) throw Error(ErrorCode::InvalidParameter, "noise_scale must be >= 0");
  const Index d = class_means.front().size();
  for (const auto& m : class_means) {
    if (m.size() != d) throw Error(ErrorCode::DimensionMismatch, "class means differ in dimension");
  }
  const Index classes = static_cast<Index>(class_means.size());
  Rng rng(seed);
  Matrix features(classes * per_class_n, d);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(features.rows()));
  Index row = 0;
  for (Index c = 0; c < classes; ++c) {
    for (Index i = 0; i < per_class_n; ++i, ++row) {
      for (Index k = 0; k < d; ++k) {
        const double z = rng.normal();
        features(row, k) = class_means[c][k] + noise_scale * z;
      }
      labels.push_back(static_cast<int>(c));
    }
  }
  return LabeledDataset(std::move(features), std::move(labels));
}

}  // namespace fedwad
