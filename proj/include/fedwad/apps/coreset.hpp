#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedwad/config.hpp"
#include "fedwad/measures.hpp"

namespace fedwad::apps {

/// K support points with uniform weights 1/K.
struct Coreset {
  Matrix points;
  std::optional<std::vector<int>> labels;

  Index size() const noexcept { return points.rows(); }
  DiscreteMeasure as_measure() const { return new_discrete(points); }
};

struct CoresetFit {
  Coreset coreset;
  std::vector<double> objective;  // W2^2 after each accepted step, first entry at init
};

/// Gradient descent on W2^2(coreset, data) with backtracking: a step that
/// increases the objective is retried with half the rate, up to 8 times, and
/// dropped if it still does not improve.
CoresetFit coreset_fit(const DiscreteMeasure& data, Index k, unsigned steps, double learning_rate,
                       std::uint64_t seed);

/// How the coordinator combines the sampled clients into one descent direction.
enum class Aggregation {
  /// Arithmetic mean of the per-client gradients of W2^2(coreset, xi_c).
  MeanGradient,
  /// Each client contributes the endpoints its interpolant points at; the
  /// coreset descends on W2^2 to the pooled endpoint cloud.
  PooledEndpoints,
};

struct ClientPool {
  std::vector<LabeledDataset> clients;
};

struct FederatedCoresetOptions {
  Index k = 10;
  unsigned rounds = 50;
  Index clients_per_round = 1;
  Index sample_size = 0;  // points drawn per client and round; 0 = all
  double learning_rate = 0.5;
  Aggregation aggregation = Aggregation::PooledEndpoints;
  std::uint64_t seed = 0;
};

struct FederatedCoresetFit {
  Coreset coreset;
  std::vector<double> loss;  // mean over sampled clients of W2^2(coreset, xi_c) per round
};

/// Federated fit: per round, sample clients, run FedWaD between the coreset
/// (held by the coordinator) and each client's data, and update the coreset
/// from the final interpolants only.
FederatedCoresetFit coreset_fit_federated(const ClientPool& pool, const FederatedCoresetOptions& opts,
                                          const FedConfig& fed);

/// Each coreset point takes the label of its nearest client sample (lowest
/// index on ties).
Coreset label_coreset(const Coreset& coreset, const LabeledDataset& data);

/// 1-NN over the pooled labeled coresets, pool order breaking ties.
int knn1_classify(const std::vector<Coreset>& pooled, const Vector& query);

}  // namespace fedwad::apps
