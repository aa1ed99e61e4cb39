#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace epa {

enum class ErrorCode {
  ShapeMismatch,
  NonFinite,
  NonSymmetric,
  NoConvergence,
  InvalidArgument,
  InsufficientSamples,
  DimMismatch,
  ZeroFeature,
  EmptyInput,
  DimTooSmall,
  UnknownMethod,
  BadMagic,
  UnsupportedVersion,
  UnsupportedDtype,
  TruncatedHeader,
  TruncatedPayload,
  BadBundle,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NonSymmetric: return "NonSymmetric";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ZeroFeature: return "ZeroFeature";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DimTooSmall: return "DimTooSmall";
    case ErrorCode::UnknownMethod: return "UnknownMethod";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::TruncatedHeader: return "TruncatedHeader";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::BadBundle: return "BadBundle";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

// Every failure in the library surfaces as an Error carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace epa
