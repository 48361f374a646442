#include "fedwad/apps/coreset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "fedwad/error.hpp"
#include "fedwad/fedwad.hpp"
#include "fedwad/ot.hpp"
#include "fedwad/rng.hpp"

namespace fedwad::apps {
namespace {

constexpr int kMaxHalvings = 8;

std::vector<Index> sample_without_replacement(Index n, Index k, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

Matrix rows_of(const Matrix& m, const std::vector<Index>& idx) {
  Matrix out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Index>(r)) = m.row(idx[r]);
  return out;
}

// Loss and the preconditioned descent direction of W2^2(coreset, target):
// the plain gradient divided by 2 a_i, so a unit rate moves every coreset point
// onto its barycentric image.
struct Descent {
  double loss;
  Matrix direction;
};

Descent descent(const Matrix& points, const DiscreteMeasure& target) {
  const DiscreteMeasure c = new_discrete(points);
  const TransportPlan plan = optimal_plan(c, target, 2);
  const Matrix g = grad_support(plan, c, target, Side::Left);
  return {plan.objective, g * (0.5 * static_cast<double>(points.rows()))};
}

double loss_against(const Matrix& points, const std::vector<DiscreteMeasure>& targets) {
  const DiscreteMeasure c = new_discrete(points);
  double total = 0.0;
  for (const auto& t : targets) total += optimal_plan(c, t, 2).objective;
  return total / static_cast<double>(targets.size());
}

// Backtracking step along `direction`; returns the accepted loss or nullopt.
template <typename LossFn>
std::optional<double> backtrack(Matrix& points, const Matrix& direction, double rate, double current,
                                LossFn&& loss) {
  for (int h = 0; h <= kMaxHalvings; ++h) {
    Matrix trial = points - rate * direction;
    const double value = loss(trial);
    if (value <= current) {
      points = std::move(trial);
      return value;
    }
    rate *= 0.5;
  }
  return std::nullopt;
}

}  // namespace

CoresetFit coreset_fit(const DiscreteMeasure& data, Index k, unsigned steps, double learning_rate,
                       std::uint64_t seed) {
  if (k < 1 || k > data.size()) {
    throw Error(ErrorCode::KTooLarge, "coreset size " + std::to_string(k) + " for " +
                                          std::to_string(data.size()) + " data points");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidParameter, "learning rate must be > 0");
  Rng rng(seed);
  Matrix points = rows_of(data.points(), sample_without_replacement(data.size(), k, rng));

  CoresetFit fit{{points, std::nullopt}, {}};
  Descent cur = descent(points, data);
  fit.objective.push_back(cur.loss);
  for (unsigned s = 0; s < steps; ++s) {
    if (cur.direction.isZero(0.0)) break;
    auto accepted = backtrack(points, cur.direction, learning_rate, cur.loss, [&](const Matrix& p) {
      return optimal_plan(new_discrete(p), data, 2).objective;
    });
    if (!accepted) break;
    const double previous = cur.loss;
    cur = descent(points, data);
    fit.objective.push_back(cur.loss);
    if (previous - cur.loss <= 1e-15 * std::max(1.0, previous)) break;
  }
  fit.coreset.points = std::move(points);
  return fit;
}

FederatedCoresetFit coreset_fit_federated(const ClientPool& pool, const FederatedCoresetOptions& opts,
                                          const FedConfig& fed) {
  if (pool.clients.empty()) throw Error(ErrorCode::InvalidParameter, "empty client pool");
  if (opts.clients_per_round < 1 ||
      opts.clients_per_round > static_cast<Index>(pool.clients.size())) {
    throw Error(ErrorCode::InvalidParameter,
                "clients_per_round must lie in [1, " + std::to_string(pool.clients.size()) + "]");
  }
  if (!(opts.learning_rate > 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "learning rate must be > 0");
  }
  if (opts.sample_size < 0) throw Error(ErrorCode::InvalidParameter, "negative sample size");
  const Index d = pool.clients.front().dim();
  Index total = 0;
  for (const auto& c : pool.clients) {
    if (c.dim() != d) throw Error(ErrorCode::DimensionMismatch, "clients differ in dimension");
    total += c.size();
  }
  if (opts.k < 1 || opts.k > total) {
    throw Error(ErrorCode::KTooLarge, "coreset size exceeds the pooled sample count");
  }
  fed.validate();

  // Where the final broadcast sits between the coreset and the client data.
  const double t_star = std::visit(
      [](const auto& p) {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, FixedT>) {
          return p.t;
        } else {
          return 0.5 * (p.lo + p.hi);
        }
      },
      fed.t_policy);

  // Initial coreset: k points drawn from a randomly chosen client's data, or
  // from the pool when one client is too small. Only used to seed the
  // coordinator's own measure, so the draw never leaves the client in a real
  // deployment; here it is simply an initialization.
  Rng rng(opts.seed);
  Matrix pooled_init(total, d);
  {
    Index r = 0;
    for (const auto& c : pool.clients) {
      pooled_init.middleRows(r, c.size()) = c.features();
      r += c.size();
    }
  }
  Matrix points = rows_of(pooled_init, sample_without_replacement(total, opts.k, rng));

  FederatedCoresetFit fit{{points, std::nullopt}, {}};
  for (unsigned round = 1; round <= opts.rounds; ++round) {
    Rng round_rng(mix_seed(opts.seed, round));
    const auto chosen = sample_without_replacement(static_cast<Index>(pool.clients.size()),
                                                   opts.clients_per_round, round_rng);
    const DiscreteMeasure coreset = new_discrete(points);
    FedConfig cfg = fed;
    cfg.xi0_policy = ProvidedInit{coreset};
    cfg.support_size = opts.k;

    std::vector<DiscreteMeasure> interps;
    for (const Index c : chosen) {
      const LabeledDataset& client = pool.clients[static_cast<std::size_t>(c)];
      DiscreteMeasure local = client.as_measure();
      if (opts.sample_size > 0 && opts.sample_size < client.size()) {
        Rng sub(mix_seed(mix_seed(opts.seed, round), static_cast<std::uint64_t>(c) + 1));
        local = new_discrete(
            rows_of(client.features(), sample_without_replacement(client.size(), opts.sample_size, sub)));
      }
      interps.push_back(run_fedwad(coreset, local, cfg).xi_final);
    }

    if (opts.aggregation == Aggregation::MeanGradient) {
      Matrix direction = Matrix::Zero(points.rows(), d);
      double loss = 0.0;
      for (const auto& xi : interps) {
        Descent g = descent(points, xi);
        direction += g.direction;
        loss += g.loss;
      }
      direction /= static_cast<double>(interps.size());
      loss /= static_cast<double>(interps.size());
      fit.loss.push_back(loss);
      backtrack(points, direction, opts.learning_rate, loss,
                [&](const Matrix& p) { return loss_against(p, interps); });
    } else {
      // Extrapolate each coreset atom's image in the client data from where
      // the broadcast measure put it, and pool these endpoints over clients.
      std::vector<Matrix> clouds;
      double loss = 0.0;
      for (const auto& xi : interps) {
        const TransportPlan plan = optimal_plan(coreset, xi, 2);
        loss += plan.objective;
        Matrix image = Matrix::Zero(points.rows(), d);
        for (const auto& e : plan.entries) image.row(e.i) += e.mass * xi.point(e.j);
        image *= static_cast<double>(points.rows());
        clouds.push_back(points + (image - points) / t_star);
      }
      fit.loss.push_back(loss / static_cast<double>(interps.size()));
      Matrix pooled(points.rows() * static_cast<Index>(clouds.size()), d);
      for (std::size_t c = 0; c < clouds.size(); ++c) {
        pooled.middleRows(static_cast<Index>(c) * points.rows(), points.rows()) = clouds[c];
      }
      const DiscreteMeasure target = new_discrete(std::move(pooled));
      const Descent g = descent(points, target);
      backtrack(points, g.direction, opts.learning_rate, g.loss, [&](const Matrix& p) {
        return optimal_plan(new_discrete(p), target, 2).objective;
      });
    }
    spdlog::debug("federated coreset round {}: loss {}", round, fit.loss.back());
  }
  fit.coreset.points = std::move(points);
  return fit;
}

Coreset label_coreset(const Coreset& coreset, const LabeledDataset& data) {
  if (data.size() == 0) throw Error(ErrorCode::InvalidParameter, "no labeled samples");
  if (data.dim() != coreset.points.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "coreset and data dimensions differ");
  }
  Coreset out = coreset;
  std::vector<int> labels(static_cast<std::size_t>(coreset.size()));
  for (Index i = 0; i < coreset.size(); ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index s = 0; s < data.size(); ++s) {
      const double dist = (data.features().row(s) - coreset.points.row(i)).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = s;
      }
    }
    labels[static_cast<std::size_t>(i)] = data.labels()[static_cast<std::size_t>(best)];
  }
  out.labels = std::move(labels);
  return out;
}

int knn1_classify(const std::vector<Coreset>& pooled, const Vector& query) {
  double best_d = std::numeric_limits<double>::infinity();
  std::optional<int> best;
  for (const auto& c : pooled) {
    if (!c.labels) throw Error(ErrorCode::InvalidParameter, "pooled coreset is not labeled");
    if (c.points.cols() != query.size()) {
      throw Error(ErrorCode::DimensionMismatch, "query dimension differs from the coresets");
    }
    for (Index i = 0; i < c.size(); ++i) {
      const double dist = (c.points.row(i).transpose() - query).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = (*c.labels)[static_cast<std::size_t>(i)];
      }
    }
  }
  if (!best) throw Error(ErrorCode::InvalidParameter, "empty coreset pool");
  return *best;
}

}  // namespace fedwad::apps
