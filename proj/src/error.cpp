#include "kel/error.hpp"

namespace kel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotControllable: return "NotControllable";
    case ErrorCode::RateNotPositive: return "RateNotPositive";
    case ErrorCode::NonPositiveForm: return "NonPositiveForm";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::SingularReference: return "SingularReference";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DriftDifferenceOutsideRange: return "DriftDifferenceOutsideRange";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::NotStationary: return "NotStationary";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::RateNotPositive:
    case ErrorCode::GridMismatch:
    case ErrorCode::TooLarge:
    case ErrorCode::DriftDifferenceOutsideRange:
    case ErrorCode::NonPositiveValue:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace kel
