#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedwad {

enum class ErrorCode {
  // measures
  NegativeWeight,
  ZeroTotalMass,
  ShapeMismatch,
  NonFiniteValue,
  NonPsdCovariance,
  // ot_core
  DimensionMismatch,
  UnsupportedExponent,
  Infeasible,
  NumericalFailure,
  TooLargeForOracle,
  // geodesics
  InvalidT,
  CovarianceMismatch,
  CollinearMeans,
  // netproto
  Truncated,
  BadMagic,
  VersionMismatch,
  WeightInvariantViolated,
  UnknownMessage,
  TransportError,
  RemoteError,
  // apps / cli
  KTooLarge,
  InvalidParameter,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// what() without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

/// Transport failures remember the protocol round they happened in (0 = handshake).
class TransportError : public Error {
 public:
  TransportError(unsigned round, const std::string& what)
      : Error(ErrorCode::TransportError, "round " + std::to_string(round) + ": " + what),
        round_(round) {}

  unsigned round() const noexcept { return round_; }

 private:
  unsigned round_;
};

}  // namespace fedwad
