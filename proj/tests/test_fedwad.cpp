#include <gtest/gtest.h>

#include <cmath>
#include <future>
#include <set>

#include "fedwad/error.hpp"
#include "fedwad/fedwad.hpp"
#include "fedwad/geodesics.hpp"
#include "fedwad/ot.hpp"
#include "fedwad/protocol.hpp"
#include "test_util.hpp"

using namespace fedwad;
using fixtures::random_measure;
using fixtures::same_atoms;

namespace {

DiscreteMeasure atoms(std::initializer_list<std::pair<double, double>> pts) {
  Matrix p(static_cast<Index>(pts.size()), 2);
  Index i = 0;
  for (const auto& [x, y] : pts) {
    p(i, 0) = x;
    p(i, 1) = y;
    ++i;
  }
  return new_discrete(p);
}

FedConfig exact_every_round(unsigned rounds, std::uint64_t seed = 0) {
  FedConfig cfg;
  cfg.rounds = rounds;
  cfg.interp_mode = InterpMode::Exact;
  cfg.report_policy = ReportPolicy::EveryRound;
  cfg.xi0_policy = StandardGaussianInit{seed};
  return cfg;
}

GaussianMeasure gauss(double x, double y, const Matrix& cov = Matrix::Identity(2, 2)) {
  Vector m(2);
  m << x, y;
  return GaussianMeasure(m, cov);
}

}  // namespace

TEST(ClientStep, SelfInterpolationIsIdentity) {
  Rng rng(1);
  const auto local = random_measure(7, 3, rng, false);
  const auto r = client_step(local, local, 0.5, InterpMode::Exact, true);
  EXPECT_TRUE(same_atoms(r.interp, local, 1e-9));
  ASSERT_TRUE(r.distance.has_value());
  EXPECT_NEAR(*r.distance, 0.0, 1e-9);
  EXPECT_FALSE(client_step(local, local, 0.5, InterpMode::Exact, false).distance.has_value());
}

TEST(ClientStep, SingleAtomsMeetHalfway) {
  const auto r = client_step(atoms({{0, 0}}), atoms({{2, 6}}), 0.5, InterpMode::Approx, true);
  ASSERT_EQ(r.interp.size(), 1);
  EXPECT_DOUBLE_EQ(r.interp.point(0)(0), 1.0);
  EXPECT_DOUBLE_EQ(r.interp.point(0)(1), 3.0);
  EXPECT_NEAR(*r.distance, std::sqrt(40.0), 1e-12);
}

TEST(ClientStep, ApproxKeepsBroadcastSupport) {
  Rng rng(2);
  const auto local = random_measure(50, 2, rng);
  const auto xi = random_measure(8, 2, rng);
  EXPECT_EQ(client_step(local, xi, 0.5, InterpMode::Approx, false).interp.size(), 8);
}

TEST(ClientStep, RejectsClosedIntervalEnds) {
  Rng rng(3);
  const auto m = random_measure(3, 2, rng);
  EXPECT_THROW(client_step(m, m, 0.0, InterpMode::Exact, false), Error);
  EXPECT_THROW(client_step(m, m, 1.0, InterpMode::Exact, false), Error);
}

TEST(ServerStep, Examples) {
  Rng rng(4);
  const auto m = random_measure(6, 2, rng, false);
  EXPECT_TRUE(same_atoms(server_step(m, m, 0.5, InterpMode::Exact), m, 1e-9));
  const auto mid = server_step(atoms({{0, 0}}), atoms({{2, 0}}), 0.5, InterpMode::Exact);
  EXPECT_DOUBLE_EQ(mid.point(0)(0), 1.0);
  EXPECT_DOUBLE_EQ(mid.point(0)(1), 0.0);
}

TEST(ServerStep, LiesOnTheGeodesic) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_measure(2 + static_cast<Index>(rng.below(10)), 3, rng, false);
    const auto b = random_measure(2 + static_cast<Index>(rng.below(10)), 3, rng, false, 1.0);
    const auto xi = server_step(a, b, 0.5, InterpMode::Exact);
    EXPECT_NEAR(wasserstein(a, xi, 2) + wasserstein(xi, b, 2), wasserstein(a, b, 2), 1e-7);
  }
}

TEST(FedConfig, Validation) {
  auto code = [](const FedConfig& c) {
    try {
      c.validate();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;  // sentinel: accepted
  };
  FedConfig c;
  EXPECT_EQ(code(c), ErrorCode::Io);
  c.rounds = 0;
  EXPECT_EQ(code(c), ErrorCode::InvalidParameter);
  c = FedConfig{};
  c.p = 1;
  EXPECT_EQ(code(c), ErrorCode::UnsupportedExponent);
  c = FedConfig{};
  c.t_policy = FixedT{1.0};
  EXPECT_EQ(code(c), ErrorCode::InvalidParameter);
  c = FedConfig{};
  c.t_policy = UniformRandomT{0.6, 0.4, 1};
  EXPECT_EQ(code(c), ErrorCode::InvalidParameter);
  c = FedConfig{};
  c.stop_tol = 1e-6;  // approx mode
  EXPECT_EQ(code(c), ErrorCode::InvalidParameter);
  c.interp_mode = InterpMode::Exact;
  c.report_policy = ReportPolicy::EveryRound;
  EXPECT_EQ(code(c), ErrorCode::Io);
  c = FedConfig{};
  c.support_size = 0;
  EXPECT_EQ(code(c), ErrorCode::InvalidParameter);
}

TEST(RunFedwad, ExactModeIsMonotoneAndBoundedBelow) {
  Rng rng(6);
  for (int trial = 0; trial < 15; ++trial) {
    const Index d = 1 + static_cast<Index>(rng.below(4));
    const auto mu = random_measure(2 + static_cast<Index>(rng.below(20)), d, rng);
    const auto nu = random_measure(2 + static_cast<Index>(rng.below(20)), d, rng, true, 1.0);
    const auto res = run_fedwad(mu, nu, exact_every_round(10, static_cast<std::uint64_t>(trial)));
    const double w = wasserstein(mu, nu, 2);
    ASSERT_EQ(res.trajectory.size(), 10u);
    for (std::size_t k = 0; k < res.trajectory.size(); ++k) {
      EXPECT_GE(res.trajectory[k].a, w - 1e-9);
      if (k > 0) {
        EXPECT_LE(res.trajectory[k].a, res.trajectory[k - 1].a + 1e-9);
      }
    }
    EXPECT_GE(res.distance, w - 1e-9);
    const auto& last = res.trajectory.back();
    EXPECT_DOUBLE_EQ(res.distance, last.d_mu + last.d_nu);
  }
}

TEST(RunFedwad, IdenticalClientsConvergeToZero) {
  Rng rng(7);
  const auto mu = random_measure(12, 2, rng);
  const auto res = run_fedwad(mu, mu, exact_every_round(12, 3));
  for (std::size_t k = 1; k < res.trajectory.size(); ++k) {
    EXPECT_LE(res.trajectory[k].a, res.trajectory[k - 1].a + 1e-9);
    EXPECT_LE(res.trajectory[k].d_mu + res.trajectory[k].d_nu,
              res.trajectory[k - 1].d_mu + res.trajectory[k - 1].d_nu + 1e-9);
  }
  EXPECT_LT(res.distance, 1e-2 * res.trajectory.front().d_mu);
}

TEST(RunFedwad, ApproxSupportStaysAtS) {
  Rng rng(8);
  const auto mu = random_measure(40, 3, rng);
  const auto nu = random_measure(30, 3, rng, true, 2.0);
  FedConfig cfg;
  cfg.rounds = 6;
  cfg.support_size = 7;
  cfg.report_policy = ReportPolicy::EveryRound;
  const auto res = run_fedwad(mu, nu, cfg);
  for (const auto& r : res.trajectory) EXPECT_EQ(r.support, 7);
  EXPECT_EQ(res.xi_final.size(), 7);
}

TEST(RunFedwad, LastRoundOnlyHidesIntermediateDistances) {
  Rng rng(9);
  const auto mu = random_measure(10, 2, rng);
  const auto nu = random_measure(10, 2, rng, true, 1.0);
  FedConfig cfg;
  cfg.rounds = 4;
  const auto res = run_fedwad(mu, nu, cfg);
  for (std::size_t k = 0; k + 1 < res.trajectory.size(); ++k) {
    EXPECT_TRUE(std::isnan(res.trajectory[k].d_mu));
    EXPECT_TRUE(std::isnan(res.trajectory[k].a));
  }
  EXPECT_FALSE(std::isnan(res.trajectory.back().d_mu));
  EXPECT_DOUBLE_EQ(res.distance, res.trajectory.back().d_mu + res.trajectory.back().d_nu);
}

TEST(RunFedwad, DeterministicPerSeed) {
  Rng rng(10);
  const auto mu = random_measure(25, 2, rng);
  const auto nu = random_measure(20, 2, rng, true, 1.0);
  FedConfig cfg;
  cfg.rounds = 5;
  cfg.report_policy = ReportPolicy::EveryRound;
  cfg.t_policy = UniformRandomT{0.3, 0.7, 44};
  cfg.xi0_policy = UnitBoxInit{5};
  const auto a = run_fedwad(mu, nu, cfg);
  const auto b = run_fedwad(mu, nu, cfg);
  EXPECT_EQ(trajectory_csv(a), trajectory_csv(b));
  EXPECT_EQ(a.distance, b.distance);
  for (const auto& r : a.trajectory) {
    for (double t : {r.t_mu, r.t_nu, r.t_server}) {
      EXPECT_GE(t, 0.3);
      EXPECT_LE(t, 0.7);
    }
    EXPECT_NE(r.t_mu, r.t_nu);
  }
  cfg.t_policy = UniformRandomT{0.3, 0.7, 45};
  EXPECT_NE(trajectory_csv(run_fedwad(mu, nu, cfg)), trajectory_csv(a));
}

TEST(RunFedwad, EarlyStopInExactMode) {
  Rng rng(11);
  const auto mu = random_measure(8, 2, rng);
  auto cfg = exact_every_round(50, 1);
  cfg.stop_tol = 1e-10;
  const auto res = run_fedwad(mu, mu, cfg);
  EXPECT_LT(res.rounds_run, 50u);
  EXPECT_EQ(res.trajectory.size(), res.rounds_run);
}

TEST(RunFedwad, DimensionMismatch) {
  Rng rng(12);
  try {
    run_fedwad(random_measure(5, 2, rng), random_measure(5, 3, rng), FedConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(RunFedwad, ProvidedInitIsTheFirstBroadcast) {
  Rng rng(13);
  const auto mu = random_measure(6, 2, rng);
  const auto nu = random_measure(6, 2, rng, true, 3.0);
  FedConfig cfg = exact_every_round(1);
  cfg.xi0_policy = ProvidedInit{nu};
  const auto res = run_fedwad(mu, nu, cfg);
  // Round 1 distances are taken against xi^0 = nu itself.
  EXPECT_NEAR(res.trajectory[0].d_nu, 0.0, 1e-9);
  EXPECT_NEAR(res.trajectory[0].d_mu, wasserstein(mu, nu, 2), 1e-9);
}

TEST(RunFedwad, TrajectoryCsvSchema) {
  Rng rng(14);
  const auto mu = random_measure(5, 2, rng);
  const auto csv = trajectory_csv(run_fedwad(mu, mu, exact_every_round(2)));
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "round,t_mu,t_nu,t_server,w_mu_ximu,w_ximu_xi,w_xi_xinu,w_xinu_nu,a,d_mu,d_nu,support");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(RunFedwad, ByteAccountingMatchesRecordedFrames) {
  Rng rng(15);
  const auto mu = random_measure(30, 2, rng);
  const auto nu = random_measure(30, 2, rng, true, 1.0);
  auto [coord_mu, client_mu] = net::make_channel_pair();
  auto [coord_nu, client_nu] = net::make_channel_pair();
  net::RecordingChannel rec_mu(*coord_mu);
  net::RecordingChannel rec_nu(*coord_nu);
  auto fa = std::async(std::launch::async, [&, ch = client_mu.get()] { return serve_client(*ch, mu); });
  auto fb = std::async(std::launch::async, [&, ch = client_nu.get()] { return serve_client(*ch, nu); });
  FedConfig cfg;
  cfg.rounds = 20;
  cfg.support_size = 10;
  const auto res = run_fedwad(rec_mu, rec_nu, cfg);
  EXPECT_DOUBLE_EQ(*fa.get(), res.distance);
  EXPECT_DOUBLE_EQ(*fb.get(), res.distance);

  std::uint64_t total = 0;
  std::uint64_t measures = 0;
  std::set<net::MsgType> received;
  for (const auto* rec : {&rec_mu, &rec_nu}) {
    for (const auto& e : rec->entries()) {
      total += e.bytes.size();
      const auto frame = net::decode_frame(e.bytes);
      measures += net::measure_payload_bytes(frame);
      if (e.direction == net::RecordingChannel::Direction::Received) received.insert(frame.type);
    }
  }
  EXPECT_EQ(res.bytes_exchanged, total);
  EXPECT_EQ(res.measure_payload_bytes, measures);
  EXPECT_EQ(res.measure_payload_bytes, 4u * 20u * (8u + 8u * 10u * 3u));
  // The coordinator only ever receives handshakes and interpolants.
  EXPECT_EQ(received, (std::set<net::MsgType>{net::MsgType::Hello, net::MsgType::InterpReply}));
}

TEST(RunFedwad, CoordinatorNeverSeesRawPoints) {
  Rng rng(16);
  const auto mu = random_measure(12, 2, rng);
  const auto nu = random_measure(12, 2, rng, true, 1.0);
  auto [coord_mu, client_mu] = net::make_channel_pair();
  auto [coord_nu, client_nu] = net::make_channel_pair();
  net::RecordingChannel rec_mu(*coord_mu);
  net::RecordingChannel rec_nu(*coord_nu);
  auto fa = std::async(std::launch::async, [&, ch = client_mu.get()] { return serve_client(*ch, mu); });
  auto fb = std::async(std::launch::async, [&, ch = client_nu.get()] { return serve_client(*ch, nu); });
  run_fedwad(rec_mu, rec_nu, exact_every_round(8));
  fa.get();
  fb.get();
  std::set<std::vector<double>> raw;
  for (const auto* m : {&mu, &nu}) {
    for (Index i = 0; i < m->size(); ++i) raw.insert({m->point(i)(0), m->point(i)(1)});
  }
  for (const auto* rec : {&rec_mu, &rec_nu}) {
    for (const auto& e : rec->entries()) {
      if (e.direction != net::RecordingChannel::Direction::Received) continue;
      const auto msg = net::decode_message(net::decode_frame(e.bytes));
      if (const auto* reply = std::get_if<net::InterpReply>(&msg)) {
        for (Index i = 0; i < reply->interp.size(); ++i) {
          EXPECT_FALSE(raw.count({reply->interp.point(i)(0), reply->interp.point(i)(1)}));
        }
      }
    }
  }
}

TEST(GaussianFedwad, ClosedFormExample) {
  const auto traj = run_fedwad_gaussian(gauss(0, 0), gauss(4, 0), gauss(0, 3), 20);
  EXPECT_NEAR(traj.initial_residual, std::sqrt(13.0), 1e-12);
  EXPECT_NEAR(traj.target, 4.0, 1e-12);
  ASSERT_EQ(traj.rounds.size(), 20u);
  double prev = traj.initial_residual;
  for (const auto& r : traj.rounds) {
    EXPECT_NEAR(r.residual, std::sqrt(13.0) / std::ldexp(1.0, static_cast<int>(r.round)),
                1e-12 * std::sqrt(13.0));
    EXPECT_NEAR(r.residual / prev, 0.5, 1e-12);
    EXPECT_NEAR(2.0 * r.client_gap, 4.0, 1e-12);
    EXPECT_LE(r.excess, std::ldexp(traj.initial_residual, 1 - static_cast<int>(r.round)) + 1e-12);
    prev = r.residual;
  }
  EXPECT_NEAR(2.0 * gaussian_w2(traj.rounds[0].xi_mu, traj.rounds[0].xi_nu), 4.0, 1e-12);
}

TEST(GaussianFedwad, RejectsDegenerateInputs) {
  try {
    run_fedwad_gaussian(gauss(0, 0), gauss(4, 0), gauss(9, 0), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CollinearMeans);
  }
  try {
    run_fedwad_gaussian(gauss(0, 0), gauss(4, 0, 2.0 * Matrix::Identity(2, 2)), gauss(0, 3), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CovarianceMismatch);
  }
}

TEST(GaussianFedwad, SharedAnisotropicCovariance) {
  Matrix cov(2, 2);
  cov << 3.0, 1.0, 1.0, 2.0;
  const auto traj = run_fedwad_gaussian(gauss(1, 2, cov), gauss(-3, 5, cov), gauss(7, -1, cov), 15);
  double prev = traj.initial_residual;
  for (const auto& r : traj.rounds) {
    EXPECT_NEAR(r.residual / prev, 0.5, 1e-12);
    EXPECT_EQ(r.xi.covariance, cov);
    prev = r.residual;
  }
}
