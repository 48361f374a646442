#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.hpp"
#include "fedwad/apps/clustering.hpp"
#include "fedwad/apps/coreset.hpp"
#include "fedwad/apps/otdd.hpp"
#include "fedwad/error.hpp"

namespace fedwad::cli {

using json = nlohmann::ordered_json;

namespace {

std::vector<LabeledDataset> load_clients(const std::vector<std::string>& paths) {
  std::vector<LabeledDataset> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(read_labeled_csv(p));
  return out;
}

LabeledDataset pool_all(const std::vector<LabeledDataset>& clients) {
  Index rows = 0;
  for (const auto& c : clients) rows += c.size();
  Matrix x(rows, clients.front().dim());
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(rows));
  Index r = 0;
  for (const auto& c : clients) {
    if (c.dim() != x.cols()) throw Error(ErrorCode::DimensionMismatch, "clients have different feature dimensions");
    x.middleRows(r, c.size()) = c.features();
    labels.insert(labels.end(), c.labels().begin(), c.labels().end());
    r += c.size();
  }
  return {std::move(x), std::move(labels)};
}

}  // namespace

void register_app_commands(CLI::App& app, std::uint64_t& seed, std::string& out) {
  {
    auto* sub = app.add_subcommand("coreset", "fit a K-point coreset, centrally or across clients");
    struct Opts {
      std::vector<std::string> data;
      Index k = 10;
      unsigned steps = 50;
      Index clients_per_round = 1;
      Index sample_size = 0;
      double lr = 0.5;
      std::string aggregation = "pooled";
      bool centralized = false;
      std::string loss_path;
      FedFlags flags;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--data", o->data, "labeled CSV per client (repeatable)")->required()->check(CLI::ExistingFile);
    sub->add_option("--k", o->k, "coreset size")->required();
    sub->add_option("--steps", o->steps, "descent steps (centralized) or coreset rounds (federated)");
    sub->add_option("--clients-per-round", o->clients_per_round, "clients sampled per round");
    sub->add_option("--sample-size", o->sample_size, "points drawn per client and round, 0 = all");
    sub->add_option("--lr", o->lr, "step size; 1 is a full Lloyd step")->check(CLI::PositiveNumber);
    sub->add_option("--aggregation", o->aggregation)->check(CLI::IsMember({"pooled", "mean"}));
    sub->add_flag("--centralized", o->centralized, "fit on the pooled data directly");
    sub->add_option("--loss", o->loss_path, "write the per-step loss as CSV");
    add_fed_flags(*sub, o->flags);
    sub->add_option("--seed", seed, "seed for initialization and client sampling");
    sub->add_option("--out", out, "labeled coreset CSV (default stdout)");
    sub->callback([o, &seed, &out] {
      const auto clients = load_clients(o->data);
      const auto pooled = pool_all(clients);
      apps::Coreset coreset;
      std::vector<double> loss;
      if (o->centralized) {
        auto fit = apps::coreset_fit(pooled.as_measure(), o->k, o->steps, o->lr, seed);
        coreset = std::move(fit.coreset);
        loss = std::move(fit.objective);
      } else {
        apps::FederatedCoresetOptions opts;
        opts.k = o->k;
        opts.rounds = o->steps;
        opts.clients_per_round = o->clients_per_round;
        opts.sample_size = o->sample_size;
        opts.learning_rate = o->lr;
        opts.aggregation = o->aggregation == "mean" ? apps::Aggregation::MeanGradient : apps::Aggregation::PooledEndpoints;
        opts.seed = seed;
        auto fit = apps::coreset_fit_federated(apps::ClientPool{clients}, opts, build_fed_config(o->flags, seed));
        coreset = std::move(fit.coreset);
        loss = std::move(fit.loss);
      }
      const auto labeled = apps::label_coreset(coreset, pooled);
      if (!o->loss_path.empty()) {
        std::ostringstream csv;
        csv.precision(17);
        csv << "step,loss\n";
        for (std::size_t i = 0; i < loss.size(); ++i) csv << i << ',' << loss[i] << '\n';
        emit(o->loss_path, csv.str());
      }
      std::ostringstream csv;
      csv.precision(17);
      for (Index k = 0; k < labeled.points.cols(); ++k) csv << 'x' << k << ',';
      csv << "label\n";
      for (Index i = 0; i < labeled.size(); ++i) {
        for (Index k = 0; k < labeled.points.cols(); ++k) csv << labeled.points(i, k) << ',';
        csv << (*labeled.labels)[static_cast<std::size_t>(i)] << '\n';
      }
      emit(out, csv.str());
    });
  }
  {
    auto* sub = app.add_subcommand("otdd", "pairwise dataset distances between clients");
    struct Opts {
      std::vector<std::string> data;
      bool federated = false;
      bool full_cov = false;
      unsigned jobs = 1;
      FedFlags flags;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--data", o->data, "labeled CSV per client (at least two)")->required()->check(CLI::ExistingFile);
    sub->add_flag("--federated", o->federated, "estimate each entry with the federated protocol");
    sub->add_flag("--full-cov", o->full_cov, "use full class covariances instead of the diagonal");
    sub->add_option("--jobs", o->jobs, "pairs computed concurrently")->check(CLI::PositiveNumber);
    add_fed_flags(*sub, o->flags);
    sub->add_option("--seed", seed, "seed for the federated runs");
    sub->add_option("--out", out, "distance matrix CSV (default stdout)");
    sub->callback([o, &seed, &out] {
      if (o->data.size() < 2) throw CLI::ValidationError("--data", "need at least two datasets");
      const auto clients = load_clients(o->data);
      std::optional<FedConfig> fed;
      if (o->federated) fed = build_fed_config(o->flags, seed);
      emit(out, apps::format_distance_matrix_csv(apps::pairwise_distance_matrix(clients, fed, !o->full_cov, o->jobs)));
    });
  }
  {
    auto* sub = app.add_subcommand("cluster", "spectral clustering of clients from a distance matrix");
    struct Opts {
      std::string distances;
      Index k = 2;
      std::string mode = "affinity";
      Index neighbors = 3;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--distances", o->distances, "distance matrix CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--k", o->k, "number of clusters")->required()->check(CLI::PositiveNumber);
    sub->add_option("--mode", o->mode)->check(CLI::IsMember({"affinity", "knn"}));
    sub->add_option("--neighbors", o->neighbors, "neighbors in knn mode")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "seed for k-means restarts");
    sub->add_option("--out", out, "JSON {client_id: label} (default stdout)");
    sub->callback([o, &seed, &out] {
      std::ifstream in(o->distances, std::ios::binary);
      std::ostringstream text;
      text << in.rdbuf();
      const auto d = apps::parse_distance_matrix_csv(text.str());
      apps::ClusterMode mode = apps::AffinityMode{};
      if (o->mode == "knn") mode = apps::KnnMode{o->neighbors};
      const auto labels = apps::spectral_cluster(d, o->k, mode, seed);
      json j = json::object();
      for (std::size_t i = 0; i < labels.size(); ++i) j[std::to_string(i)] = labels[i];
      emit(out, j.dump(2) + "\n");
    });
  }
}

}  // namespace fedwad::cli
