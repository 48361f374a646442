#include <charconv>
#include <cmath>
#include <future>
#include <limits>

#include <spdlog/spdlog.h>

#include "fedwad/error.hpp"
#include "fedwad/fedwad.hpp"
#include "fedwad/ot.hpp"
#include "fedwad/rng.hpp"

namespace fedwad {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Frame I/O for one coordinator run; counts every byte and tags transport
// failures with the round they happened in.
class Wire {
 public:
  Wire(net::Channel& mu, net::Channel& nu) : mu_(mu), nu_(nu) {}

  net::Channel& mu() { return mu_; }
  net::Channel& nu() { return nu_; }

  void send(net::Channel& ch, const net::Message& msg, unsigned round) {
    const net::Frame frame = net::encode_message(msg);
    count(frame);
    try {
      ch.send(frame);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::TransportError) throw TransportError(round, e.message());
      throw;
    }
  }

  net::Message receive(net::Channel& ch, unsigned round) {
    net::Frame frame;
    try {
      frame = ch.receive();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::TransportError) throw TransportError(round, e.message());
      throw;
    }
    count(frame);
    net::Message msg = net::decode_message(frame);
    if (const auto* err = std::get_if<net::ErrorReply>(&msg)) {
      throw Error(ErrorCode::RemoteError,
                  "client error " + std::to_string(err->code) + ": " + err->message);
    }
    return msg;
  }

  template <typename T>
  T expect(net::Channel& ch, unsigned round, const char* what) {
    net::Message msg = receive(ch, round);
    if (auto* m = std::get_if<T>(&msg)) return std::move(*m);
    throw Error(ErrorCode::UnknownMessage, std::string("expected ") + what + " from client");
  }

  void abort(net::WireError code, const std::string& message) {
    for (net::Channel* ch : {&mu_, &nu_}) {
      try {
        ch->send(net::encode_message(net::ErrorReply{static_cast<std::uint16_t>(code), message}));
      } catch (const Error&) {
      }
    }
  }

  std::uint64_t bytes = 0;
  std::uint64_t measure_bytes = 0;

 private:
  void count(const net::Frame& frame) {
    bytes += net::kFrameHeaderSize + frame.payload.size();
    measure_bytes += net::measure_payload_bytes(frame);
  }

  net::Channel& mu_;
  net::Channel& nu_;
};

net::SessionOptions options_for(const FedConfig& c, Party role) {
  net::SessionOptions o;
  o.role = role;
  o.rounds = c.rounds;
  o.report = c.report_policy;
  o.mode = c.interp_mode;
  o.p = static_cast<std::uint8_t>(c.p);
  o.t_policy = c.t_policy;
  return o;
}

FedResult coordinate(Wire& wire, const FedConfig& config) {
  config.validate();

  for (auto [ch, role] : {std::pair{&wire.mu(), Party::ClientMu}, {&wire.nu(), Party::ClientNu}}) {
    net::Hello hello;
    hello.options = options_for(config, role);
    wire.send(*ch, hello, 0);
  }
  const auto h_mu = wire.expect<net::Hello>(wire.mu(), 0, "HELLO");
  const auto h_nu = wire.expect<net::Hello>(wire.nu(), 0, "HELLO");
  for (const auto* h : {&h_mu, &h_nu}) {
    if (h->version != net::kProtocolVersion) {
      wire.abort(net::WireError::VersionMismatch, "protocol version mismatch");
      throw Error(ErrorCode::VersionMismatch, "client speaks version " + std::to_string(h->version));
    }
  }
  if (h_mu.dim != h_nu.dim || h_mu.dim == 0) {
    wire.abort(net::WireError::DimensionMismatch, "client dimensions differ");
    throw Error(ErrorCode::DimensionMismatch, "clients announced d = " + std::to_string(h_mu.dim) +
                                                  " and d = " + std::to_string(h_nu.dim));
  }

  const Index d = h_mu.dim;
  Vector lo(d);
  Vector hi(d);
  for (Index k = 0; k < d; ++k) {
    const auto u = static_cast<std::size_t>(2 * k);
    lo[k] = std::min(h_mu.range[u], h_nu.range[u]);
    hi[k] = std::max(h_mu.range[u + 1], h_nu.range[u + 1]);
  }
  DiscreteMeasure xi = initial_xi(config, lo, hi);
  if (xi.dim() != d) {
    wire.abort(net::WireError::DimensionMismatch, "initial measure has the wrong dimension");
    throw Error(ErrorCode::DimensionMismatch, "provided initial measure has the wrong dimension");
  }

  FedResult result{0.0, {}, xi, 0, 0, 0};
  const bool every = config.report_policy == ReportPolicy::EveryRound;
  double d_mu = kNaN;
  double d_nu = kNaN;
  for (unsigned k = 1; k <= config.rounds; ++k) {
    wire.send(wire.mu(), net::XiBroadcast{k, xi}, k);
    wire.send(wire.nu(), net::XiBroadcast{k, xi}, k);
    auto r_mu = wire.expect<net::InterpReply>(wire.mu(), k, "INTERP_REPLY");
    auto r_nu = wire.expect<net::InterpReply>(wire.nu(), k, "INTERP_REPLY");
    if (r_mu.round != k || r_nu.round != k) {
      throw Error(ErrorCode::UnknownMessage, "reply for the wrong round");
    }
    if (r_mu.interp.dim() != d || r_nu.interp.dim() != d) {
      throw Error(ErrorCode::DimensionMismatch, "reply has the wrong dimension");
    }

    RoundRecord rec;
    rec.round = k;
    rec.t_mu = t_for(config.t_policy, Party::ClientMu, k);
    rec.t_nu = t_for(config.t_policy, Party::ClientNu, k);
    rec.t_server = t_for(config.t_policy, Party::Server, k);
    xi = server_step(r_mu.interp, r_nu.interp, rec.t_server, config.interp_mode);
    rec.support = xi.size();

    const bool observed = every || k == config.rounds;
    rec.w_mu_ximu = r_mu.interp_distance.value_or(kNaN);
    rec.w_xinu_nu = r_nu.interp_distance.value_or(kNaN);
    rec.w_ximu_xi = observed ? wasserstein(r_mu.interp, xi, config.p) : kNaN;
    rec.w_xi_xinu = observed ? wasserstein(xi, r_nu.interp, config.p) : kNaN;
    rec.a = rec.w_mu_ximu + rec.w_ximu_xi + rec.w_xi_xinu + rec.w_xinu_nu;
    rec.d_mu = r_mu.distance.value_or(kNaN);
    rec.d_nu = r_nu.distance.value_or(kNaN);
    d_mu = rec.d_mu;
    d_nu = rec.d_nu;
    result.trajectory.push_back(rec);
    result.rounds_run = k;
    spdlog::debug("round {}: |xi| = {}, A = {}", k, rec.support, rec.a);

    if (config.stop_tol && k >= 2) {
      const double prev = result.trajectory[result.trajectory.size() - 2].a;
      if (std::abs(rec.a - prev) < *config.stop_tol) {
        spdlog::info("stopping after round {}: |A^k - A^(k-1)| < {}", k, *config.stop_tol);
        break;
      }
    }
  }

  result.distance = d_mu + d_nu;
  result.xi_final = std::move(xi);
  const unsigned last = result.rounds_run;
  wire.send(wire.mu(), net::Done{result.distance}, last);
  wire.send(wire.nu(), net::Done{result.distance}, last);
  result.bytes_exchanged = wire.bytes;
  result.measure_payload_bytes = wire.measure_bytes;
  return result;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

DiscreteMeasure initial_xi(const FedConfig& config, const Vector& lo, const Vector& hi) {
  const Index s = config.support_size;
  const Index d = lo.size();
  return std::visit(
      [&](const auto& policy) -> DiscreteMeasure {
        using T = std::decay_t<decltype(policy)>;
        if constexpr (std::is_same_v<T, ProvidedInit>) {
          return policy.measure;
        } else {
          Rng rng(policy.seed);
          Matrix pts(s, d);
          for (Index i = 0; i < s; ++i) {
            for (Index k = 0; k < d; ++k) {
              if constexpr (std::is_same_v<T, StandardGaussianInit>) {
                pts(i, k) = 0.5 * (lo[k] + hi[k]) + 0.25 * (hi[k] - lo[k]) * rng.normal();
              } else {
                pts(i, k) = rng.uniform(lo[k], hi[k]);
              }
            }
          }
          return new_discrete(std::move(pts));
        }
      },
      config.xi0_policy);
}

FedResult run_fedwad(net::Channel& client_mu, net::Channel& client_nu, const FedConfig& config) {
  Wire wire(client_mu, client_nu);
  try {
    return coordinate(wire, config);
  } catch (...) {
    client_mu.close();
    client_nu.close();
    throw;
  }
}

FedResult run_fedwad(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const FedConfig& config) {
  config.validate();
  auto [coord_mu, client_mu] = net::make_channel_pair();
  auto [coord_nu, client_nu] = net::make_channel_pair();
  auto serve = [](net::Channel* ch, const DiscreteMeasure* data) { return serve_client(*ch, *data); };
  auto f_mu = std::async(std::launch::async, serve, client_mu.get(), &mu);
  auto f_nu = std::async(std::launch::async, serve, client_nu.get(), &nu);
  std::optional<FedResult> result;
  std::exception_ptr failure;
  try {
    result = run_fedwad(*coord_mu, *coord_nu, config);
  } catch (...) {
    failure = std::current_exception();
  }
  for (auto* f : {&f_mu, &f_nu}) {
    try {
      f->get();
    } catch (...) {
      // A coordinator failure explains the client's; otherwise report the client's.
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return std::move(*result);
}

FedResult run_remote_fedwad(const net::Endpoint& mu, const net::Endpoint& nu,
                            const FedConfig& config) {
  config.validate();
  std::unique_ptr<net::Channel> ch_mu;
  std::unique_ptr<net::Channel> ch_nu;
  try {
    ch_mu = net::tcp_connect(mu);
    ch_nu = net::tcp_connect(nu);
  } catch (const Error& e) {
    if (ch_mu) ch_mu->close();
    throw TransportError(0, e.message());
  }
  return run_fedwad(*ch_mu, *ch_nu, config);
}

std::string trajectory_csv(const FedResult& result) {
  std::string out =
      "round,t_mu,t_nu,t_server,w_mu_ximu,w_ximu_xi,w_xi_xinu,w_xinu_nu,a,d_mu,d_nu,support\n";
  for (const auto& r : result.trajectory) {
    out += std::to_string(r.round);
    for (double v : {r.t_mu, r.t_nu, r.t_server, r.w_mu_ximu, r.w_ximu_xi, r.w_xi_xinu, r.w_xinu_nu,
                     r.a, r.d_mu, r.d_nu}) {
      out += ',';
      append_double(out, v);
    }
    out += ',';
    out += std::to_string(r.support);
    out += '\n';
  }
  return out;
}

}  // namespace fedwad
