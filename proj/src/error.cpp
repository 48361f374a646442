#include "fedwad/error.hpp"

namespace fedwad {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::ZeroTotalMass: return "ZeroTotalMass";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NonPsdCovariance: return "NonPsdCovariance";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnsupportedExponent: return "UnsupportedExponent";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::TooLargeForOracle: return "TooLargeForOracle";
    case ErrorCode::InvalidT: return "InvalidT";
    case ErrorCode::CovarianceMismatch: return "CovarianceMismatch";
    case ErrorCode::CollinearMeans: return "CollinearMeans";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::WeightInvariantViolated: return "WeightInvariantViolated";
    case ErrorCode::UnknownMessage: return "UnknownMessage";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::RemoteError: return "RemoteError";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace fedwad
