#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "fedwad/error.hpp"
#include "fedwad/fedwad.hpp"
#include "fedwad/geodesics.hpp"
#include "fedwad/ot.hpp"
#include "fedwad/rng.hpp"

namespace fedwad::cli {

using json = nlohmann::ordered_json;

namespace {

// Sweep settings; keys of the bench config file map one-to-one onto fields.
struct BenchConfig {
  std::vector<Index> n{10, 50, 100, 200, 500, 1000, 2000, 5000};
  std::vector<Index> d{2, 50};
  std::vector<std::string> methods{"centralized", "fedwad-exact", "fedwad-approx"};
  std::vector<Index> support{2, 10, 100};
  std::vector<Index> sample_ratios{1, 3};
  unsigned seeds = 10;
  unsigned rounds = 20;
  double t = 0.5;
  double mean_gap = 4.0;
  Index exact_init_support = 10;
};

BenchConfig load_bench_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  BenchConfig c;
  try {
    const auto j = json::parse(text.str());
    static const std::set<std::string> known{"n", "d", "methods", "support", "sample_ratios", "seeds",
                                             "rounds", "t", "mean_gap", "exact_init_support"};
    for (const auto& [key, _] : j.items()) {
      if (!known.contains(key)) throw Error(ErrorCode::InvalidParameter, path + ": unknown key '" + key + "'");
    }
    if (j.contains("n")) c.n = j["n"].get<std::vector<Index>>();
    if (j.contains("d")) c.d = j["d"].get<std::vector<Index>>();
    if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("support")) c.support = j["support"].get<std::vector<Index>>();
    if (j.contains("sample_ratios")) c.sample_ratios = j["sample_ratios"].get<std::vector<Index>>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<unsigned>();
    if (j.contains("rounds")) c.rounds = j["rounds"].get<unsigned>();
    if (j.contains("t")) c.t = j["t"].get<double>();
    if (j.contains("mean_gap")) c.mean_gap = j["mean_gap"].get<double>();
    if (j.contains("exact_init_support")) c.exact_init_support = j["exact_init_support"].get<Index>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidParameter, path + ": " + e.what());
  }
  for (const auto& m : c.methods) {
    if (m != "centralized" && m != "fedwad-exact" && m != "fedwad-approx") {
      throw Error(ErrorCode::InvalidParameter, "unknown bench method '" + m + "'");
    }
  }
  if (!(c.mean_gap > 0.0)) throw Error(ErrorCode::InvalidParameter, "mean_gap must be positive");
  return c;
}

struct Cell {
  Index n = 0;
  Index d = 0;
  std::string method;
  Index support = 0;
  Index ratio = 1;
  unsigned seed = 0;
  double time_ms = 0.0;
  double rel_error = 0.0;
};

void run_cell(Cell& cell, const BenchConfig& cfg, std::uint64_t base_seed) {
  // Data depend on (seed, n, d, ratio) only, so every method sees the same samples.
  std::uint64_t s = mix_seed(base_seed, cell.seed);
  s = mix_seed(s, static_cast<std::uint64_t>(cell.n));
  s = mix_seed(s, static_cast<std::uint64_t>(cell.d));
  s = mix_seed(s, static_cast<std::uint64_t>(cell.ratio));
  Vector shifted = Vector::Zero(cell.d);
  shifted[0] = cfg.mean_gap;
  const Matrix eye = Matrix::Identity(cell.d, cell.d);
  const auto mu = sample_gaussian(GaussianMeasure(Vector::Zero(cell.d), eye), cell.n, mix_seed(s, 1));
  const auto nu = sample_gaussian(GaussianMeasure(shifted, eye), cell.n * cell.ratio, mix_seed(s, 2));

  const auto t0 = std::chrono::steady_clock::now();
  double estimate = 0.0;
  if (cell.method == "centralized") {
    estimate = wasserstein(mu, nu, 2);
  } else {
    FedConfig fed;
    fed.rounds = cfg.rounds;
    fed.t_policy = FixedT{cfg.t};
    fed.interp_mode = cell.method == "fedwad-exact" ? InterpMode::Exact : InterpMode::Approx;
    fed.support_size = cell.support;
    fed.xi0_policy = StandardGaussianInit{mix_seed(s, 3)};
    estimate = run_fedwad(mu, nu, fed).distance;
  }
  cell.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  // Ground truth is the analytic distance between the two generating Gaussians.
  cell.rel_error = std::abs(estimate - cfg.mean_gap) / cfg.mean_gap;
}

std::vector<Cell> expand(const BenchConfig& cfg) {
  std::vector<Cell> cells;
  for (Index n : cfg.n) {
    for (Index d : cfg.d) {
      for (Index ratio : cfg.sample_ratios) {
        for (const auto& method : cfg.methods) {
          std::vector<Index> supports{0};
          if (method == "fedwad-approx") supports = cfg.support;
          if (method == "fedwad-exact") supports = {cfg.exact_init_support};
          for (Index support : supports) {
            for (unsigned seed = 0; seed < cfg.seeds; ++seed) {
              Cell c;
              c.n = n;
              c.d = d;
              c.method = method;
              c.support = support;
              c.ratio = ratio;
              c.seed = seed;
              cells.push_back(c);
            }
          }
        }
      }
    }
  }
  return cells;
}

void run_cells(std::vector<Cell>& cells, const BenchConfig& cfg, std::uint64_t base_seed, unsigned jobs) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cells.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        run_cell(cells[i], cfg, base_seed);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct ItemCheck {
  bool pass = true;
  double worst = 0.0;
  void record(double violation) {
    worst = std::max(worst, violation);
    if (violation > 0.0) pass = false;
  }
};

}  // namespace

void register_bench_commands(CLI::App& app, std::uint64_t& seed, std::string& out) {
  {
    auto* sub = app.add_subcommand("bench", "accuracy and runtime sweep against analytic Gaussian distances");
    struct Opts {
      std::string config;
      unsigned jobs = 1;
      unsigned seeds = 0;
      unsigned rounds = 0;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--config", o->config, "JSON sweep definition")->required()->check(CLI::ExistingFile);
    sub->add_option("--jobs", o->jobs, "cells run concurrently")->check(CLI::PositiveNumber);
    auto* seeds_opt = sub->add_option("--seeds", o->seeds, "override the number of seeds")->check(CLI::PositiveNumber);
    auto* rounds_opt = sub->add_option("--rounds", o->rounds, "override the protocol rounds")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "base seed for data and initial broadcasts");
    sub->add_option("--out", out, "CSV output (default stdout)");
    sub->callback([o, seeds_opt, rounds_opt, &seed, &out] {
      auto cfg = load_bench_config(o->config);
      if (seeds_opt->count() > 0) cfg.seeds = o->seeds;
      if (rounds_opt->count() > 0) cfg.rounds = o->rounds;
      auto cells = expand(cfg);
      run_cells(cells, cfg, seed, o->jobs);
      std::ostringstream csv;
      csv << "n,d,method,support,sample_ratio,time_ms,rel_error,seed\n";
      for (const auto& c : cells) {
        char row[256];
        std::snprintf(row, sizeof row, "%td,%td,%s,%td,1:%td,%.3f,%.9g,%u\n", static_cast<std::ptrdiff_t>(c.n),
                      static_cast<std::ptrdiff_t>(c.d), c.method.c_str(), static_cast<std::ptrdiff_t>(c.support),
                      static_cast<std::ptrdiff_t>(c.ratio), c.time_ms, c.rel_error, c.seed);
        csv << row;
      }
      emit(out, csv.str());
    });
  }
  {
    auto* sub = app.add_subcommand("gauss-check", "check the shared-covariance Gaussian guarantees on random triples");
    struct Opts {
      unsigned trials = 50;
      unsigned rounds = 20;
      Index dim = 2;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--trials", o->trials)->check(CLI::PositiveNumber);
    sub->add_option("--rounds", o->rounds)->check(CLI::PositiveNumber);
    sub->add_option("--dim", o->dim)->check(CLI::Range(2, 64));
    sub->add_option("--seed", seed, "seed for the random triples");
    sub->add_option("--out", out, "JSON report (default stdout)");
    sub->callback([o, &seed, &out] {
      Rng rng(seed);
      const Index d = o->dim;
      ItemCheck items[4];
      unsigned done = 0;
      while (done < o->trials) {
        Matrix l(d, d);
        for (Index i = 0; i < l.size(); ++i) l.data()[i] = rng.normal();
        const Matrix cov = l * l.transpose() + 0.1 * Matrix::Identity(d, d);
        auto mean = [&] {
          Vector v(d);
          for (Index i = 0; i < d; ++i) v[i] = 3.0 * rng.normal();
          return v;
        };
        const GaussianMeasure g_mu(mean(), cov), g_nu(mean(), cov), g_xi(mean(), cov);
        GaussianTrajectory traj;
        try {
          traj = run_fedwad_gaussian(g_mu, g_nu, g_xi, o->rounds);
        } catch (const Error& e) {
          if (e.code() == ErrorCode::CollinearMeans) continue;
          throw;
        }
        ++done;
        const double scale = std::max({1.0, traj.initial_residual, traj.target});
        const double gap = (g_mu.mean - g_nu.mean).norm();
        double prev = traj.initial_residual;
        for (const auto& r : traj.rounds) {
          double cov_dev = 0.0;
          for (const auto* g : {&r.xi_mu, &r.xi_nu, &r.xi}) cov_dev = std::max(cov_dev, (g->covariance - cov).cwiseAbs().maxCoeff());
          items[0].record(cov_dev);
          items[1].record(std::abs(2.0 * gaussian_w2(r.xi_mu, r.xi_nu) - gap) - 1e-12 * scale);
          items[2].record(std::abs(r.residual / prev - 0.5) - 1e-12);
          items[3].record(r.excess - std::ldexp(traj.initial_residual, 1 - static_cast<int>(r.round)) - 1e-12 * scale);
          prev = r.residual;
        }
      }
      static const char* kNames[4] = {"iterates keep the shared covariance", "client interpolants sit half the distance apart",
                                      "residual halves every round", "excess bounded by 2^(1-k) times the initial residual"};
      json j;
      j["trials"] = o->trials;
      j["rounds"] = o->rounds;
      j["dim"] = d;
      j["seed"] = seed;
      j["items"] = json::array();
      bool all = true;
      for (int i = 0; i < 4; ++i) {
        j["items"].push_back({{"item", i + 1}, {"property", kNames[i]}, {"pass", items[i].pass}, {"max_violation", items[i].worst}});
        all = all && items[i].pass;
      }
      j["pass"] = all;
      emit(out, j.dump(2) + "\n");
      if (!all) throw Error(ErrorCode::NumericalFailure, "gauss-check: at least one property failed");
    });
  }
}

}  // namespace fedwad::cli
