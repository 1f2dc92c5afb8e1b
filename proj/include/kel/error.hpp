#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kel {

enum class ErrorCode {
  InvalidArgument,
  NotControllable,
  RateNotPositive,
  NonPositiveForm,
  NonFiniteState,
  GridMismatch,
  SingularReference,
  TooLarge,
  NotConverged,
  DegenerateGeometry,
  NotPositiveDefinite,
  DriftDifferenceOutsideRange,
  NonPositiveValue,
  DegenerateSeries,
  NotStationary,
};

std::string_view to_string(ErrorCode code);

// Validation errors are caller mistakes (bad input, inapplicable estimate);
// everything else is a numerical failure.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace kel
