#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cellseg {

enum class ErrorCode {
  InvalidArgument,
  UnsupportedFormat,
  CorruptFile,
  DimensionOverflow,
  RangeError,
  IoError,
  LabelOverflow,
  EmptyStack,
  DimensionMismatch,
  MarkerExceedsMask,
  NegativeH,
  SeedOutsideMask,
  ConstantImage,
  ThresholdTooLow,
  EmptyInput,
  CropTooLarge,
  BadCount,
  PlacementFailure,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::DimensionOverflow: return "DimensionOverflow";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::LabelOverflow: return "LabelOverflow";
    case ErrorCode::EmptyStack: return "EmptyStack";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MarkerExceedsMask: return "MarkerExceedsMask";
    case ErrorCode::NegativeH: return "NegativeH";
    case ErrorCode::SeedOutsideMask: return "SeedOutsideMask";
    case ErrorCode::ConstantImage: return "ConstantImage";
    case ErrorCode::ThresholdTooLow: return "ThresholdTooLow";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::CropTooLarge: return "CropTooLarge";
    case ErrorCode::BadCount: return "BadCount";
    case ErrorCode::PlacementFailure: return "PlacementFailure";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI, bindings) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cellseg
