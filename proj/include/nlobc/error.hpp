#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlobc {

enum class ErrorCode {
  CornerPoint,
  NotConvex,
  NoHit,
  StepTooLarge,
  DeltaTooLarge,
  NonIntegrable,
  ClosureRequired,
  MonotonicityViolation,
  NoConvergence,
  StiffPenalty,
  NoTouchingPoint,
  HorizonTooShort,
  Unsupported,
  InvalidArgument,
  ConfigError,
  ValidationError,
};

std::string_view to_string(ErrorCode code);

/// Library error. Every failure surfaced by nlobc is an Error carrying a code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CornerPoint: return "CornerPoint";
    case ErrorCode::NotConvex: return "NotConvex";
    case ErrorCode::NoHit: return "NoHit";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::DeltaTooLarge: return "DeltaTooLarge";
    case ErrorCode::NonIntegrable: return "NonIntegrable";
    case ErrorCode::ClosureRequired: return "ClosureRequired";
    case ErrorCode::MonotonicityViolation: return "MonotonicityViolation";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::StiffPenalty: return "StiffPenalty";
    case ErrorCode::NoTouchingPoint: return "NoTouchingPoint";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

}  // namespace nlobc
