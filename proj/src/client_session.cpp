#include <spdlog/spdlog.h>

#include "fedwad/error.hpp"
#include "fedwad/fedwad.hpp"
#include "fedwad/geodesics.hpp"
#include "fedwad/ot.hpp"

namespace fedwad {

ClientStepResult client_step(const DiscreteMeasure& local, const DiscreteMeasure& xi, double t,
                             InterpMode mode, bool report) {
  if (!(t > 0.0 && t < 1.0)) throw Error(ErrorCode::InvalidT, "client t must lie in (0, 1)");
  const TransportPlan plan = optimal_plan(local, xi, 2);
  auto interp = mode == InterpMode::Exact ? interp_exact(local, xi, t, plan)
                                          : interp_approx(local, xi, t, plan);
  std::optional<double> distance;
  if (report) distance = std::sqrt(std::max(0.0, plan.objective));
  return {std::move(interp), distance};
}

DiscreteMeasure server_step(const DiscreteMeasure& xi_mu, const DiscreteMeasure& xi_nu, double t,
                            InterpMode mode) {
  return interpolate(xi_mu, xi_nu, t, mode);
}

namespace {

using net::WireError;

void send_error(net::Channel& ch, WireError code, const std::string& message) {
  try {
    ch.send(net::encode_message(net::ErrorReply{static_cast<std::uint16_t>(code), message}));
  } catch (const Error&) {
    // The peer may already be gone; the local error is what matters.
  }
  ch.close();
}

net::Message receive(net::Channel& ch) {
  try {
    return net::decode_message(ch.receive());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TransportError) send_error(ch, WireError::MalformedFrame, e.what());
    throw;
  }
}

}  // namespace

std::optional<double> serve_client(net::Channel& ch, const DiscreteMeasure& local) {
  net::Message first = receive(ch);
  const auto* hello = std::get_if<net::Hello>(&first);
  if (hello == nullptr) {
    send_error(ch, WireError::UnexpectedMessage, "expected HELLO");
    throw Error(ErrorCode::UnknownMessage, "session did not start with HELLO");
  }
  if (hello->version != net::kProtocolVersion) {
    const std::string msg = "protocol version " + std::to_string(hello->version) +
                            " not supported (want " + std::to_string(net::kProtocolVersion) + ")";
    send_error(ch, WireError::VersionMismatch, msg);
    throw Error(ErrorCode::VersionMismatch, msg);
  }
  if (!hello->options) {
    send_error(ch, WireError::MalformedFrame, "coordinator HELLO must carry session options");
    throw Error(ErrorCode::InvalidParameter, "HELLO without session options");
  }
  const net::SessionOptions opts = *hello->options;
  if (opts.p != 2) {
    send_error(ch, WireError::SolverFailure, "only p = 2 is supported");
    throw Error(ErrorCode::UnsupportedExponent, "session asked for p = " + std::to_string(opts.p));
  }

  net::Hello reply;
  reply.dim = static_cast<std::uint32_t>(local.dim());
  const auto [lo, hi] = local.bounds();
  for (Index k = 0; k < local.dim(); ++k) {
    reply.range.push_back(lo[k]);
    reply.range.push_back(hi[k]);
  }
  ch.send(net::encode_message(reply));
  spdlog::debug("client: session opened, {} rounds, mode {}", opts.rounds, to_string(opts.mode));

  while (true) {
    net::Message msg = receive(ch);
    if (auto* done = std::get_if<net::Done>(&msg)) {
      spdlog::debug("client: done, distance {}", done->distance);
      ch.close();
      return done->distance;
    }
    if (auto* err = std::get_if<net::ErrorReply>(&msg)) {
      spdlog::warn("client: coordinator aborted ({}): {}", err->code, err->message);
      ch.close();
      return std::nullopt;
    }
    auto* bcast = std::get_if<net::XiBroadcast>(&msg);
    if (bcast == nullptr) {
      send_error(ch, WireError::UnexpectedMessage, "expected XI_BROADCAST or DONE");
      throw Error(ErrorCode::UnknownMessage, "unexpected message during session");
    }
    if (bcast->xi.dim() != local.dim()) {
      send_error(ch, WireError::DimensionMismatch, "broadcast dimension differs from local data");
      throw Error(ErrorCode::DimensionMismatch, "broadcast dimension differs from local data");
    }

    const bool every = opts.report == ReportPolicy::EveryRound;
    const bool report = every || bcast->round == opts.rounds;
    std::optional<ClientStepResult> step;
    std::optional<double> interp_distance;
    try {
      const double t = t_for(opts.t_policy, opts.role, bcast->round);
      step = client_step(local, bcast->xi, t, opts.mode, report);
      if (every) interp_distance = wasserstein(local, step->interp, 2);
    } catch (const Error& e) {
      send_error(ch, WireError::SolverFailure, e.what());
      throw;
    }
    net::InterpReply out{bcast->round, std::move(step->interp), step->distance, interp_distance};
    ch.send(net::encode_message(out));
  }
}

}  // namespace fedwad
