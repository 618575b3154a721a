#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vtp {

enum class ErrorCode {
  InvalidParams,
  SelfIntersectingOutline,
  NonPositiveThickness,
  PerturbationInfeasible,
  ResolutionTooCoarse,
  DegenerateMask,
  EigenSolveFailure,
  MassNotPositive,
  OracleFailureRate,
  SingularNormalEquations,
  NotTrained,
  DegenerateVariance,
  ObjectiveNaN,
  GateFailed,
  UsageError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures are reported through this type so callers (CLI,
// HTTP service) can map the code to an exit status or a response.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vtp
