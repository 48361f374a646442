#include "fedwad/apps/otdd.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <future>
#include <sstream>

#include "fedwad/error.hpp"
#include "fedwad/fedwad.hpp"
#include "fedwad/ot.hpp"

namespace fedwad::apps {

DiscreteMeasure otdd_featurize(const LabeledDataset& ds, bool diag_only) {
  const Index d = ds.dim();
  if (ds.size() == 0) throw Error(ErrorCode::ShapeMismatch, "empty dataset");
  const Index extra = diag_only ? d : d * d;
  Matrix rows(ds.size(), 2 * d + extra);
  const auto& stats = ds.class_stats();
  for (Index i = 0; i < ds.size(); ++i) {
    const ClassStats& s = stats.at(ds.labels()[static_cast<std::size_t>(i)]);
    rows.row(i).head(d) = ds.features().row(i);
    rows.row(i).segment(d, d) = s.mean.transpose();
    if (diag_only) {
      rows.row(i).tail(d) = s.covariance.diagonal().transpose();
    } else {
      for (Index r = 0; r < d; ++r) rows.row(i).segment(2 * d + r * d, d) = s.covariance.row(r);
    }
  }
  return new_discrete(std::move(rows));
}

double otdd_distance(const LabeledDataset& a, const LabeledDataset& b,
                     const std::optional<FedConfig>& fed, bool diag_only) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "datasets differ in dimension");
  const DiscreteMeasure fa = otdd_featurize(a, diag_only);
  const DiscreteMeasure fb = otdd_featurize(b, diag_only);
  if (!fed) return wasserstein(fa, fb, 2);
  return run_fedwad(fa, fb, *fed).distance;
}

DistanceMatrix pairwise_distance_matrix(const std::vector<LabeledDataset>& clients,
                                        const std::optional<FedConfig>& fed, bool diag_only,
                                        unsigned parallelism) {
  const auto c = static_cast<Index>(clients.size());
  DistanceMatrix out{Matrix::Zero(c, c)};
  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i < c; ++i) {
    for (Index j = i + 1; j < c; ++j) pairs.emplace_back(i, j);
  }
  const std::size_t batch = std::max(1u, parallelism);
  for (std::size_t start = 0; start < pairs.size(); start += batch) {
    const std::size_t stop = std::min(pairs.size(), start + batch);
    std::vector<std::future<double>> running;
    for (std::size_t p = start; p < stop; ++p) {
      const auto [i, j] = pairs[p];
      running.push_back(std::async(batch == 1 ? std::launch::deferred : std::launch::async, [&, i, j] {
        return otdd_distance(clients[static_cast<std::size_t>(i)], clients[static_cast<std::size_t>(j)],
                             fed, diag_only);
      }));
    }
    for (std::size_t p = start; p < stop; ++p) {
      const auto [i, j] = pairs[p];
      const double v = running[p - start].get();
      out.values(i, j) = v;
      out.values(j, i) = v;
    }
  }
  return out;
}

std::string format_distance_matrix_csv(const DistanceMatrix& d) {
  std::string out;
  char buf[64];
  for (Index i = 0; i < d.size(); ++i) {
    for (Index j = 0; j < d.size(); ++j) {
      if (j > 0) out += ',';
      const auto res = std::to_chars(buf, buf + sizeof buf, d.values(i, j));
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

DistanceMatrix parse_distance_matrix_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      double v = 0.0;
      const char* first = line.data() + pos;
      const char* last = line.data() + comma;
      while (first < last && *first == ' ') ++first;
      const auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc{} || res.ptr != last) {
        throw Error(ErrorCode::Io, "bad distance entry on row " + std::to_string(rows.size() + 1));
      }
      row.push_back(v);
      pos = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  const auto c = static_cast<Index>(rows.size());
  DistanceMatrix d{Matrix(c, c)};
  for (Index i = 0; i < c; ++i) {
    if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != c) {
      throw Error(ErrorCode::ShapeMismatch, "distance matrix is not square");
    }
    for (Index j = 0; j < c; ++j) d.values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  for (Index i = 0; i < c; ++i) {
    if (!(std::abs(d.values(i, i)) <= 1e-9)) throw Error(ErrorCode::InvalidParameter, "nonzero diagonal");
    for (Index j = 0; j < i; ++j) {
      if (!(std::abs(d.values(i, j) - d.values(j, i)) <= 1e-9) || d.values(i, j) < 0.0) {
        throw Error(ErrorCode::InvalidParameter, "distance matrix must be symmetric and nonnegative");
      }
    }
  }
  return d;
}

}  // namespace fedwad::apps
