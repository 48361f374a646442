// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <string>
#include <vector>

#include "fedwad/apps/clustering.hpp"
#include "fedwad/apps/coreset.hpp"
#include "fedwad/apps/otdd.hpp"
#include "fedwad/fedwad.hpp"
#include "fedwad/geodesics.hpp"
#include "fedwad/ot.hpp"
#include "fedwad/protocol.hpp"
#include "fedwad/transport.hpp"
#include "test_util.hpp"

using namespace fedwad;
using namespace fedwad::apps;
using fedwad::fixtures::random_measure;
using fedwad::fixtures::same_atoms;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Weights that are multiples of 1/q, every atom nonempty.
Vector rational_weights(Index parts, Index q, Rng& rng) {
  std::vector<int> k(static_cast<std::size_t>(parts), 1);
  for (Index r = parts; r < q; ++r) ++k[rng.below(static_cast<std::uint64_t>(parts))];
  Vector w(parts);
  for (Index i = 0; i < parts; ++i) w[i] = k[static_cast<std::size_t>(i)] / static_cast<double>(q);
  return w;
}

Outcome solver_optimality() {
  Rng rng(1001);
  const auto t0 = std::chrono::steady_clock::now();
  int bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const Index q = 2 + static_cast<Index>(rng.below(9));
    const Index n = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(q)));
    const Index m = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(q)));
    const Index d = 1 + static_cast<Index>(rng.below(3));
    const auto a = rational_weights(n, q, rng);
    const auto b = rational_weights(m, q, rng);
    Matrix x(n, d), y(m, d);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
    const auto cost = cost_matrix(x, y, trial % 3 == 0 ? 1 : 2);
    const double gap = std::abs(solve_exact(a, b, cost).objective - oracle_cost(a, b, cost));
    worst = std::max(worst, gap);
    if (gap > 1e-9) ++bad;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 30.0, fmt("500 instances, %d mismatches, max gap %.2e, %.2f s", bad, worst, secs)};
}

Outcome approx_equals_exact() {
  Rng rng(1002);
  int failures = 0;
  for (int c = 0; c < 200; ++c) {
    const Index n = 2 + c % 19;
    const double t = 0.1 * static_cast<double>(1 + (c / 19) % 9);
    const Index d = 1 + static_cast<Index>(rng.below(4));
    const auto mu = random_measure(n, d, rng);
    const auto nu = random_measure(n, d, rng, true, 1.0);
    if (!same_atoms(interp_approx(mu, nu, t), interp_exact(mu, nu, t), 1e-9)) ++failures;
  }
  return {failures == 0, fmt("200 cases, %d failures", failures)};
}

Outcome monotone_bound() {
  Rng rng(1003);
  int violations = 0;
  double worst_rise = -1e300;
  double worst_floor = 1e300;
  for (int pair = 0; pair < 100; ++pair) {
    const Index n = 2 + static_cast<Index>(rng.below(29));
    const Index m = 2 + static_cast<Index>(rng.below(29));
    const Index d = 1 + static_cast<Index>(rng.below(5));
    const auto mu = random_measure(n, d, rng);
    const auto nu = random_measure(m, d, rng, true, 1.0);
    FedConfig cfg;
    cfg.rounds = 15;
    cfg.interp_mode = InterpMode::Exact;
    cfg.report_policy = ReportPolicy::EveryRound;
    cfg.xi0_policy = StandardGaussianInit{static_cast<std::uint64_t>(pair)};
    const auto res = run_fedwad(mu, nu, cfg);
    const double w = wasserstein(mu, nu, 2);
    double prev = 1e300;
    double min_a = 1e300;
    for (const auto& r : res.trajectory) {
      worst_rise = std::max(worst_rise, r.a - prev);
      if (r.a > prev + 1e-9) ++violations;
      prev = r.a;
      min_a = std::min(min_a, r.a);
    }
    worst_floor = std::min(worst_floor, min_a - w);
    if (min_a < w - 1e-9) ++violations;
  }
  return {violations == 0,
          fmt("100 pairs, %d violations, max rise %.2e, min(A)-W %.2e", violations, worst_rise, worst_floor)};
}

Outcome gaussian_contraction() {
  Rng rng(1004);
  int bad = 0;
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index d = 2 + static_cast<Index>(rng.below(3));
    Matrix l(d, d);
    for (Index i = 0; i < l.size(); ++i) l.data()[i] = rng.normal();
    const Matrix cov = l * l.transpose() + 0.1 * Matrix::Identity(d, d);
    auto mean = [&] {
      Vector v(d);
      for (Index i = 0; i < d; ++i) v[i] = 3.0 * rng.normal();
      return v;
    };
    const GaussianMeasure g_mu(mean(), cov), g_nu(mean(), cov), g_xi(mean(), cov);
    const auto traj = run_fedwad_gaussian(g_mu, g_nu, g_xi, 20);
    const double scale = std::max({1.0, traj.initial_residual, traj.target});
    double prev = traj.initial_residual;
    bool ok = traj.rounds.size() == 20;
    const double gap = 2.0 * gaussian_w2(traj.rounds[0].xi_mu, traj.rounds[0].xi_nu);
    ok = ok && std::abs(gap - (g_mu.mean - g_nu.mean).norm()) <= 1e-12 * scale;
    for (const auto& r : traj.rounds) {
      const double dev = std::abs(r.residual / prev - 0.5);
      worst_ratio = std::max(worst_ratio, dev);
      ok = ok && dev <= 1e-12;
      ok = ok && r.excess <= std::ldexp(traj.initial_residual, 1 - static_cast<int>(r.round)) + 1e-12 * scale;
      prev = r.residual;
    }
    if (!ok) ++bad;
  }
  return {bad == 0, fmt("50 triples, %d failing, max |ratio-0.5| %.2e", bad, worst_ratio)};
}

Outcome toy_accuracy() {
  // Means 15 apart: with S = 10 the fixed-support error scales like 1/gap^2.
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> errs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    Matrix x(200, 2), y(200, 2);
    for (Index i = 0; i < 200; ++i) {
      x(i, 0) = rng.normal();
      x(i, 1) = rng.normal();
      y(i, 0) = 15.0 + rng.normal();
      y(i, 1) = rng.normal();
    }
    const auto mu = new_discrete(x);
    const auto nu = new_discrete(y);
    FedConfig cfg;
    cfg.rounds = 20;
    cfg.support_size = 10;
    cfg.interp_mode = InterpMode::Approx;
    cfg.xi0_policy = StandardGaussianInit{seed};
    const double w = wasserstein(mu, nu, 2);
    errs.push_back(std::abs(run_fedwad(mu, nu, cfg).distance - w) / w);
  }
  std::sort(errs.begin(), errs.end());
  const double median = 0.5 * (errs[4] + errs[5]);
  const double secs = seconds_since(t0);
  return {median <= 5e-3 && secs < 60.0, fmt("median rel err %.2e, max %.2e, %.2f s", median, errs.back(), secs)};
}

// Serves mu and nu on ephemeral loopback ports and runs the coordinator remotely.
FedResult remote_run(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const FedConfig& cfg) {
  net::TcpListener lmu(net::Endpoint{"127.0.0.1", 0});
  net::TcpListener lnu(net::Endpoint{"127.0.0.1", 0});
  auto serve = [](net::TcpListener& l, const DiscreteMeasure& m) {
    return std::async(std::launch::async, [&l, &m] {
      auto ch = l.accept();
      return serve_client(*ch, m);
    });
  };
  auto fa = serve(lmu, mu);
  auto fb = serve(lnu, nu);
  auto res = run_remote_fedwad({"127.0.0.1", lmu.port()}, {"127.0.0.1", lnu.port()}, cfg);
  fa.get();
  fb.get();
  return res;
}

Outcome communication_bytes() {
  Rng rng(1006);
  bool ok = true;
  std::string detail;
  for (const auto& [k, s, d] : {std::tuple{20u, 10, 2}, std::tuple{7u, 4, 5}}) {
    const auto mu = random_measure(40, d, rng);
    const auto nu = random_measure(35, d, rng, true, 2.0);
    FedConfig cfg;
    cfg.rounds = k;
    cfg.support_size = s;
    const auto res = remote_run(mu, nu, cfg);
    const std::uint64_t expected = 4ull * k * (8 + 8ull * static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(d + 1));
    ok = ok && res.measure_payload_bytes == expected;
    detail += fmt("K=%u S=%d d=%d: %llu (expected %llu); ", k, s, d,
                  static_cast<unsigned long long>(res.measure_payload_bytes),
                  static_cast<unsigned long long>(expected));
  }
  return {ok, detail};
}

Outcome remote_differential() {
  Rng rng(1007);
  int mismatches = 0;
  for (int c = 0; c < 20; ++c) {
    const Index d = 1 + static_cast<Index>(rng.below(4));
    const auto mu = random_measure(5 + static_cast<Index>(rng.below(25)), d, rng, rng.uniform() < 0.5);
    const auto nu = random_measure(5 + static_cast<Index>(rng.below(25)), d, rng, rng.uniform() < 0.5, 1.0);
    FedConfig cfg;
    cfg.rounds = 1 + static_cast<unsigned>(rng.below(10));
    cfg.interp_mode = rng.uniform() < 0.5 ? InterpMode::Exact : InterpMode::Approx;
    cfg.support_size = 2 + static_cast<Index>(rng.below(10));
    cfg.report_policy = rng.uniform() < 0.5 ? ReportPolicy::EveryRound : ReportPolicy::LastRoundOnly;
    if (rng.uniform() < 0.5) {
      cfg.t_policy = UniformRandomT{0.2, 0.8, rng.next()};
    } else {
      cfg.t_policy = FixedT{rng.uniform(0.1, 0.9)};
    }
    cfg.xi0_policy = rng.uniform() < 0.5 ? Xi0Policy{StandardGaussianInit{rng.next()}} : Xi0Policy{UnitBoxInit{rng.next()}};
    const auto remote = remote_run(mu, nu, cfg);
    const auto local = run_fedwad(mu, nu, cfg);
    if (std::abs(remote.distance - local.distance) > 1e-12 || trajectory_csv(remote) != trajectory_csv(local)) ++mismatches;
  }
  return {mismatches == 0, fmt("20 configs, %d mismatches", mismatches)};
}

const double kCorners[4][2] = {{0, 0}, {10, 0}, {0, 10}, {10, 10}};

Outcome coreset_recovery() {
  int seeds_ok = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(mix_seed(2008, seed));
    ClientPool pool;
    for (const auto& c : kCorners) {
      Matrix x(100, 2);
      for (Index i = 0; i < 100; ++i) {
        x(i, 0) = c[0] + 0.3 * rng.normal();
        x(i, 1) = c[1] + 0.3 * rng.normal();
      }
      pool.clients.emplace_back(x, std::vector<int>(100, 0));
    }
    FederatedCoresetOptions opts;
    opts.k = 4;
    opts.rounds = 15;
    opts.clients_per_round = 4;
    opts.seed = seed;
    FedConfig fed;
    fed.rounds = 10;
    fed.interp_mode = InterpMode::Exact;
    const auto fit = coreset_fit_federated(pool, opts, fed);
    int found = 0;
    for (const auto& c : kCorners) {
      double best = 1e300;
      for (Index i = 0; i < fit.coreset.size(); ++i) {
        best = std::min(best, std::hypot(fit.coreset.points(i, 0) - c[0], fit.coreset.points(i, 1) - c[1]));
      }
      if (best <= 1.0) ++found;
    }
    if (found == 4) ++seeds_ok;
  }

  Rng rng(2009);
  int grad_ok = 0;
  int instances = 0;
  while (instances < 100) {
    const Index n = 2 + static_cast<Index>(rng.below(5));
    const Index m = 2 + static_cast<Index>(rng.below(5));
    const Index d = 1 + static_cast<Index>(rng.below(3));
    const auto mu = random_measure(n, d, rng, false);
    const auto nu = random_measure(m, d, rng, false, 0.5);
    const auto plan = optimal_plan(mu, nu, 2);
    const Side side = instances % 2 == 0 ? Side::Left : Side::Right;
    const Matrix g = grad_support(plan, mu, nu, side);
    if (g.norm() < 1e-8) continue;  // degenerate: nothing to compare against
    ++instances;
    const DiscreteMeasure& moved = side == Side::Left ? mu : nu;
    const double h = 1e-6;
    Matrix fd(moved.size(), moved.dim());
    for (Index i = 0; i < moved.size(); ++i) {
      for (Index k = 0; k < moved.dim(); ++k) {
        auto value = [&](double delta) {
          Matrix pts = moved.points();
          pts(i, k) += delta;
          const auto shifted = DiscreteMeasure::from_normalized(pts, moved.weights());
          return side == Side::Left ? optimal_plan(shifted, nu, 2).objective : optimal_plan(mu, shifted, 2).objective;
        };
        fd(i, k) = (value(h) - value(-h)) / (2 * h);
      }
    }
    if ((g - fd).norm() <= 1e-4 * g.norm()) ++grad_ok;
  }
  return {seeds_ok >= 4 && grad_ok >= 95, fmt("modes recovered in %d/5 seeds, gradient ok on %d/100", seeds_ok, grad_ok)};
}

// Two classes; `shift` moves the whole dataset and separates its class means further.
LabeledDataset planted_dataset(double shift, Index per_class, Rng& rng) {
  Matrix x(2 * per_class, 2);
  std::vector<int> labels(static_cast<std::size_t>(2 * per_class));
  for (Index i = 0; i < x.rows(); ++i) {
    const int c = static_cast<int>(i % 2);
    labels[static_cast<std::size_t>(i)] = c;
    x(i, 0) = (c ? 4.0 : 0.0) + shift + 0.5 * rng.normal();
    x(i, 1) = 0.5 * rng.normal() + 0.5 * shift * c;
  }
  return {x, labels};
}

Outcome otdd_ordering() {
  int ordered = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(mix_seed(3009, seed));
    const auto a = planted_dataset(0.0, 50, rng);
    const auto b = planted_dataset(1.0, 50, rng);
    const auto c = planted_dataset(3.0, 50, rng);
    FedConfig fed;
    fed.rounds = 20;
    fed.interp_mode = InterpMode::Exact;
    fed.xi0_policy = StandardGaussianInit{seed};
    const double fab = otdd_distance(a, b, fed);
    const double fac = otdd_distance(a, c, fed);
    const double fbc = otdd_distance(b, c, fed);
    const double cab = otdd_distance(a, b);
    const double cac = otdd_distance(a, c);
    const double cbc = otdd_distance(b, c);
    if (fab < fac && fbc < fac && cab < cac) ++ordered;
    for (auto [f, c0] : {std::pair{fab, cab}, std::pair{fac, cac}, std::pair{fbc, cbc}}) {
      worst = std::max(worst, std::abs(f - c0) / c0);
    }
  }
  return {ordered == 5 && worst <= 2e-2, fmt("ordering held in %d/5 seeds, max rel gap %.2e", ordered, worst)};
}

Outcome clustering_recovery() {
  constexpr Index kGroups = 5;
  constexpr Index kPerGroup = 6;
  int affinity_perfect = 0;
  double min_knn3 = 1.0;
  double min_knn5 = 1.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(mix_seed(4010, seed));
    std::vector<Vector> centers;
    for (Index g = 0; g < kGroups; ++g) {
      Vector m(2);
      m << 6.0 * std::cos(2.0 * M_PI * static_cast<double>(g) / kGroups), 6.0 * std::sin(2.0 * M_PI * static_cast<double>(g) / kGroups);
      centers.push_back(m);
    }
    std::vector<LabeledDataset> clients;
    std::vector<int> truth;
    for (Index g = 0; g < kGroups; ++g) {
      for (Index c = 0; c < kPerGroup; ++c) {
        Vector offset = Vector::Constant(2, 3.0);
        clients.push_back(make_synthetic_labeled({centers[static_cast<std::size_t>(g)], centers[static_cast<std::size_t>(g)] + offset},
                                                 20, 0.7, rng.next()));
        truth.push_back(static_cast<int>(g));
      }
    }
    FedConfig fed;
    fed.rounds = 10;
    fed.support_size = 10;
    fed.interp_mode = InterpMode::Approx;
    fed.xi0_policy = StandardGaussianInit{seed};
    const auto d = pairwise_distance_matrix(clients, fed);
    if (adjusted_rand_index(spectral_cluster(d, kGroups, AffinityMode{}, seed), truth) == 1.0) ++affinity_perfect;
    min_knn3 = std::min(min_knn3, adjusted_rand_index(spectral_cluster(d, kGroups, KnnMode{3}, seed), truth));
    min_knn5 = std::min(min_knn5, adjusted_rand_index(spectral_cluster(d, kGroups, KnnMode{5}, seed), truth));
  }
  return {affinity_perfect == 5 && min_knn3 >= 0.8 && min_knn5 >= 0.8,
          fmt("affinity ARI 1 in %d/5 seeds, min knn3 ARI %.3f, min knn5 ARI %.3f", affinity_perfect, min_knn3, min_knn5)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"solver optimality vs oracle", solver_optimality},
      {"approx interpolant equals exact", approx_equals_exact},
      {"A^(k) non-increasing and bounded", monotone_bound},
      {"Gaussian contraction", gaussian_contraction},
      {"toy accuracy", toy_accuracy},
      {"communication accounting", communication_bytes},
      {"remote vs in-process", remote_differential},
      {"coreset mode recovery", coreset_recovery},
      {"OTDD ordering", otdd_ordering},
      {"clustering recovery", clustering_recovery},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome out;
    try {
      out = run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    if (!out.pass) ++failed;
    std::printf("[%s] %2d %s: %s\n", out.pass ? "PASS" : "FAIL", index, name, out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", index - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
