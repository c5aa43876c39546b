#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adasgo {

enum class ErrorCode {
  InvalidArgument,
  UnsupportedLevel,
  DimensionMismatch,
  NonFiniteValue,
  BudgetExceeded,
  NotADownset,
  SingularHessian,
  NoProgress,
  LineSearchFailed,
  MissingEstimate,
  DegenerateFit,
  SingularSystem,
  DomainViolation,
  InvalidProblem,
  UnknownProblem,
  UnknownMethod,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace adasgo
