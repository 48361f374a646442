#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedwad/config.hpp"
#include "fedwad/measures.hpp"
#include "fedwad/transport.hpp"

namespace fedwad {

/// Client half of a round: interpolate between the local data and the
/// broadcast measure. The distance W_2(local, xi) comes from the same plan.
struct ClientStepResult {
  DiscreteMeasure interp;
  std::optional<double> distance;
};
ClientStepResult client_step(const DiscreteMeasure& local, const DiscreteMeasure& xi, double t,
                             InterpMode mode, bool report);

/// Coordinator half: interpolant between the two client replies.
DiscreteMeasure server_step(const DiscreteMeasure& xi_mu, const DiscreteMeasure& xi_nu, double t,
                            InterpMode mode);

/// One row of the A^(k) trajectory. Columns that were not observable under the
/// report policy are NaN.
struct RoundRecord {
  unsigned round = 0;
  double t_mu = 0.0;
  double t_nu = 0.0;
  double t_server = 0.0;
  double w_mu_ximu = 0.0;   // W(mu, xi_mu^k)
  double w_ximu_xi = 0.0;   // W(xi_mu^k, xi^k)
  double w_xi_xinu = 0.0;   // W(xi^k, xi_nu^k)
  double w_xinu_nu = 0.0;   // W(xi_nu^k, nu)
  double a = 0.0;           // sum of the four terms
  double d_mu = 0.0;        // W(mu, xi^(k-1)) reported by the mu client
  double d_nu = 0.0;        // W(xi^(k-1), nu) reported by the nu client
  Index support = 0;        // |xi^k|
};

struct FedResult {
  double distance = 0.0;
  std::vector<RoundRecord> trajectory;
  DiscreteMeasure xi_final;
  unsigned rounds_run = 0;
  std::uint64_t bytes_exchanged = 0;        // every frame, both directions, both clients
  std::uint64_t measure_payload_bytes = 0;  // measure blobs only
};

/// Tidy CSV of the trajectory, doubles in shortest round-trip form.
std::string trajectory_csv(const FedResult& result);

/// Serves one FedWaD session for the data holder on the far side of `channel`.
/// Returns the distance announced in DONE, or nullopt when the session ended
/// with an ERROR frame. Protocol violations are answered with ERROR and then
/// rethrown.
std::optional<double> serve_client(net::Channel& channel, const DiscreteMeasure& local);

/// Coordinator over two already connected clients.
FedResult run_fedwad(net::Channel& client_mu, net::Channel& client_nu, const FedConfig& config);

/// Both clients in-process, each in its own thread behind an in-process channel.
FedResult run_fedwad(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const FedConfig& config);

/// Coordinator dialing two serve-client processes.
FedResult run_remote_fedwad(const net::Endpoint& mu, const net::Endpoint& nu,
                            const FedConfig& config);

/// Initial broadcast measure for a run whose clients announced `lo`/`hi`.
DiscreteMeasure initial_xi(const FedConfig& config, const Vector& lo, const Vector& hi);

/// Analytic backend for shared-covariance Gaussians.
struct GaussianRound {
  unsigned round = 0;
  GaussianMeasure xi_mu;
  GaussianMeasure xi_nu;
  GaussianMeasure xi;
  double residual = 0.0;      // W2(xi^k, xi*), xi* the midpoint of mu and nu
  double client_gap = 0.0;    // W2(xi_mu^k, xi_nu^k)
  double excess = 0.0;        // W2(mu, xi^k) + W2(xi^k, nu) - W2(mu, nu)
};

struct GaussianTrajectory {
  double initial_residual = 0.0;  // W2(xi^0, xi*)
  double target = 0.0;            // W2(mu, nu)
  std::vector<GaussianRound> rounds;
};

/// Runs the protocol on Gaussian iterates with t = 0.5. Means are propagated in
/// binary128 so the geometric decay stays resolved far below double epsilon.
/// Throws CollinearMeans when the three means are aligned.
GaussianTrajectory run_fedwad_gaussian(const GaussianMeasure& g_mu, const GaussianMeasure& g_nu,
                                       const GaussianMeasure& g_xi0, unsigned rounds);

}  // namespace fedwad
