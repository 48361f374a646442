#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedwad/config.hpp"
#include "fedwad/measures.hpp"

namespace fedwad::apps {

/// Rows become [x ; m_y ; diag(Sigma_y)] (or vec(Sigma_y) when diag_only is
/// false), so that squared Euclidean distance on the rows is the label-aware
/// ground metric with a Bures-style class term.
DiscreteMeasure otdd_featurize(const LabeledDataset& ds, bool diag_only = true);

/// Centralized when `fed` is empty, otherwise FedWaD on the featurized sets.
double otdd_distance(const LabeledDataset& a, const LabeledDataset& b,
                     const std::optional<FedConfig>& fed = std::nullopt, bool diag_only = true);

/// Symmetric, zero diagonal.
struct DistanceMatrix {
  Matrix values;
  Index size() const noexcept { return values.rows(); }
};

/// One distance per unordered pair, at most `parallelism` running at a time.
DistanceMatrix pairwise_distance_matrix(const std::vector<LabeledDataset>& clients,
                                        const std::optional<FedConfig>& fed, bool diag_only = true,
                                        unsigned parallelism = 1);

std::string format_distance_matrix_csv(const DistanceMatrix& d);
DistanceMatrix parse_distance_matrix_csv(const std::string& text);

}  // namespace fedwad::apps
