#pragma once

#include <stdexcept>
#include <string>

namespace deepstop {

// Machine-checkable failure categories. The CLI maps ConfigError-ish codes
// to exit code 2 and everything else to 3.
enum class ErrorCode {
  NotPositiveDefinite,
  DimensionMismatch,
  BatchTooSmall,
  NoForwardRecorded,
  CheckpointGridMismatch,
  MissingFineGrid,
  WrongPayoffKind,
  IncompatibleGrid,
  UnknownPreset,
  ParseError,
  ValidationError,
  IoError,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::NoForwardRecorded: return "NoForwardRecorded";
    case ErrorCode::CheckpointGridMismatch: return "CheckpointGridMismatch";
    case ErrorCode::MissingFineGrid: return "MissingFineGrid";
    case ErrorCode::WrongPayoffKind: return "WrongPayoffKind";
    case ErrorCode::IncompatibleGrid: return "IncompatibleGrid";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  bool is_config_error() const noexcept {
    return code_ == ErrorCode::UnknownPreset || code_ == ErrorCode::ParseError ||
           code_ == ErrorCode::ValidationError;
  }

 private:
  ErrorCode code_;
};

}  // namespace deepstop
