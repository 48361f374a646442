#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>

#include "fedwad/measures.hpp"

namespace fedwad {

enum class InterpMode : std::uint8_t { Exact = 0, Approx = 1 };
enum class ReportPolicy : std::uint8_t { LastRoundOnly = 0, EveryRound = 1 };

struct FixedT {
  double t = 0.5;
};
struct UniformRandomT {
  double lo = 0.25;
  double hi = 0.75;
  std::uint64_t seed = 0;
};
using TPolicy = std::variant<FixedT, UniformRandomT>;

struct StandardGaussianInit {
  std::uint64_t seed = 0;
};
struct UnitBoxInit {
  std::uint64_t seed = 0;
};
struct ProvidedInit {
  DiscreteMeasure measure;
};
using Xi0Policy = std::variant<StandardGaussianInit, UnitBoxInit, ProvidedInit>;

/// Protocol parameters for one FedWaD run.
struct FedConfig {
  unsigned rounds = 20;
  TPolicy t_policy = FixedT{};
  InterpMode interp_mode = InterpMode::Approx;
  Index support_size = 10;
  Xi0Policy xi0_policy = StandardGaussianInit{};
  ReportPolicy report_policy = ReportPolicy::LastRoundOnly;
  std::optional<double> stop_tol;
  int p = 2;

  /// Throws InvalidParameter / UnsupportedExponent on a bad combination.
  void validate() const;
};

/// Which party draws a t value. Clients and the coordinator draw from
/// independent streams of the same seed.
enum class Party : std::uint8_t { ClientMu = 0, ClientNu = 1, Server = 2 };

/// t used by `party` in `round` (1-based); deterministic for a given policy.
double t_for(const TPolicy& policy, Party party, unsigned round);

std::string_view to_string(InterpMode mode);
std::string_view to_string(ReportPolicy policy);

}  // namespace fedwad
