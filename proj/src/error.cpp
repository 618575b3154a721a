#include "vtp/error.hpp"

namespace vtp {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::SelfIntersectingOutline: return "SelfIntersectingOutline";
    case ErrorCode::NonPositiveThickness: return "NonPositiveThickness";
    case ErrorCode::PerturbationInfeasible: return "PerturbationInfeasible";
    case ErrorCode::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorCode::DegenerateMask: return "DegenerateMask";
    case ErrorCode::EigenSolveFailure: return "EigenSolveFailure";
    case ErrorCode::MassNotPositive: return "MassNotPositive";
    case ErrorCode::OracleFailureRate: return "OracleFailureRate";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::NotTrained: return "NotTrained";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::ObjectiveNaN: return "ObjectiveNaN";
    case ErrorCode::GateFailed: return "GateFailed";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace vtp
