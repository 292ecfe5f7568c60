#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scrn {

enum class ErrorCode {
  NonFinite,
  SingularShift,
  DimMismatch,
  DimTooLarge,
  ZeroGradient,
  BadSpec,
  EmptyGrid,
  IndexOutOfRange,
  ZeroDenominator,
  GenerationFailed,
  ConfigError,
  IoError,
  EmptyInput,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::SingularShift: return "SingularShift";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::DimTooLarge: return "DimTooLarge";
    case ErrorCode::ZeroGradient: return "ZeroGradient";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::GenerationFailed: return "GenerationFailed";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyInput: return "EmptyInput";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace scrn
