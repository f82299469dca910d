#pragma once

#include <stdexcept>
#include <string>

namespace gazeintent {

enum class ErrorCode {
  InvalidInput,
  MalformedStream,
  InsufficientData,
  AllOutliers,
  DegenerateElevation,
  Parse,
  Validation,
  Shape,
  SchemaMismatch,
  MissingRanking,
  MissingClass,
  Config,
  Io,
  Version,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::MalformedStream: return "malformed-stream";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::AllOutliers: return "all-outliers";
    case ErrorCode::DegenerateElevation: return "degenerate-elevation";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Shape: return "shape";
    case ErrorCode::SchemaMismatch: return "schema-mismatch";
    case ErrorCode::MissingRanking: return "missing-ranking";
    case ErrorCode::MissingClass: return "missing-class";
    case ErrorCode::Config: return "config";
    case ErrorCode::Io: return "io";
    case ErrorCode::Version: return "version";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace gazeintent
