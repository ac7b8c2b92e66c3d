#pragma once

#include <stdexcept>
#include <string>

namespace jointstruct {

enum class ErrorCode {
  ParseError,
  DimMismatch,
  IndexOutOfRange,
  MissingAttrFeature,
  CyclicTree,
  OverlappingBlocks,
  DanglingPartIndex,
  NoGroundTruth,
  EmptyTrainingSet,
  SpaceTooLarge,
  EmptyInput,
  InvalidArgument,
  IoError,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::MissingAttrFeature: return "MissingAttrFeature";
    case ErrorCode::CyclicTree: return "CyclicTree";
    case ErrorCode::OverlappingBlocks: return "OverlappingBlocks";
    case ErrorCode::DanglingPartIndex: return "DanglingPartIndex";
    case ErrorCode::NoGroundTruth: return "NoGroundTruth";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::SpaceTooLarge: return "SpaceTooLarge";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

// A single validation finding; validators collect these instead of throwing
// so a report can list every violated invariant at once.
struct Violation {
  ErrorCode code;
  std::string message;
};

}  // namespace jointstruct
