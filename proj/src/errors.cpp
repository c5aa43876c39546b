#include "adasgo/errors.hpp"

namespace adasgo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnsupportedLevel: return "UnsupportedLevel";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::NotADownset: return "NotADownset";
    case ErrorCode::SingularHessian: return "SingularHessian";
    case ErrorCode::NoProgress: return "NoProgress";
    case ErrorCode::LineSearchFailed: return "LineSearchFailed";
    case ErrorCode::MissingEstimate: return "MissingEstimate";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::InvalidProblem: return "InvalidProblem";
    case ErrorCode::UnknownProblem: return "UnknownProblem";
    case ErrorCode::UnknownMethod: return "UnknownMethod";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace adasgo
