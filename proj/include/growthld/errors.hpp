#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace growthld {

enum class ErrorCode {
  TargetOutOfRange,
  BracketFailure,
  BeyondSteepLimit,
  DomainError,
  ErgodicityViolated,
  NoStabilizingSolution,
  SingularClosedLoop,
  NumericalBlowup,
  InvalidModel,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::TargetOutOfRange: return "TargetOutOfRange";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::BeyondSteepLimit: return "BeyondSteepLimit";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ErgodicityViolated: return "ErgodicityViolated";
    case ErrorCode::NoStabilizingSolution: return "NoStabilizingSolution";
    case ErrorCode::SingularClosedLoop: return "SingularClosedLoop";
    case ErrorCode::NumericalBlowup: return "NumericalBlowup";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Configuration problems (bad model parameters, bad simulation settings)
/// versus numerical failures. The CLI maps these to distinct exit codes.
constexpr bool is_config_error(ErrorCode code) {
  return code == ErrorCode::InvalidModel || code == ErrorCode::InvalidConfig;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace growthld
