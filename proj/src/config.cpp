#include "fedwad/config.hpp"

#include <cmath>

#include "fedwad/error.hpp"
#include "fedwad/rng.hpp"

namespace fedwad {

void FedConfig::validate() const {
  if (rounds < 1) throw Error(ErrorCode::InvalidParameter, "rounds must be >= 1");
  if (support_size < 1) throw Error(ErrorCode::InvalidParameter, "support size must be >= 1");
  if (p != 2) {
    throw Error(ErrorCode::UnsupportedExponent,
                "FedWaD interpolates along W2 geodesics; p must be 2");
  }
  if (const auto* fixed = std::get_if<FixedT>(&t_policy)) {
    if (!(fixed->t > 0.0 && fixed->t < 1.0)) {
      throw Error(ErrorCode::InvalidParameter, "fixed t must lie in (0, 1)");
    }
  } else {
    const auto& r = std::get<UniformRandomT>(t_policy);
    if (!(r.lo > 0.0 && r.lo <= r.hi && r.hi < 1.0)) {
      throw Error(ErrorCode::InvalidParameter, "random t needs 0 < lo <= hi < 1");
    }
  }
  if (stop_tol) {
    if (!(*stop_tol >= 0.0) || !std::isfinite(*stop_tol)) {
      throw Error(ErrorCode::InvalidParameter, "stop_tol must be a finite nonnegative number");
    }
    if (interp_mode != InterpMode::Exact) {
      throw Error(ErrorCode::InvalidParameter, "early stopping is only defined in exact mode");
    }
    if (report_policy != ReportPolicy::EveryRound) {
      throw Error(ErrorCode::InvalidParameter, "early stopping needs every-round reports");
    }
  }
}

double t_for(const TPolicy& policy, Party party, unsigned round) {
  if (const auto* fixed = std::get_if<FixedT>(&policy)) return fixed->t;
  const auto& r = std::get<UniformRandomT>(policy);
  Rng rng(mix_seed(mix_seed(r.seed, static_cast<std::uint64_t>(party)), round));
  return rng.uniform(r.lo, r.hi);
}

std::string_view to_string(InterpMode mode) {
  return mode == InterpMode::Exact ? "exact" : "approx";
}

std::string_view to_string(ReportPolicy policy) {
  return policy == ReportPolicy::EveryRound ? "every_round" : "last_round_only";
}

}  // namespace fedwad
