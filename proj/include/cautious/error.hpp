#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cautious {

enum class ErrorCode {
  InsufficientData,
  InvalidFeature,
  InvalidBandwidth,
  DimensionMismatch,
  InvalidK,
  InvalidAlpha,
  InvalidConfig,
  UnknownClass,
  DuplicateClass,
  EmptyClassifier,
  EmptyEvalSet,
  MalformedHeader,
  RaggedRow,
  NonFiniteValue,
  DuplicateId,
  InvalidSpec,
  IoFailure,
  VersionMismatch,
  CorruptManifest,
  MissingClassFile,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidFeature: return "InvalidFeature";
    case ErrorCode::InvalidBandwidth: return "InvalidBandwidth";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::InvalidAlpha: return "InvalidAlpha";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::DuplicateClass: return "DuplicateClass";
    case ErrorCode::EmptyClassifier: return "EmptyClassifier";
    case ErrorCode::EmptyEvalSet: return "EmptyEvalSet";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptManifest: return "CorruptManifest";
    case ErrorCode::MissingClassFile: return "MissingClassFile";
  }
  return "Unknown";
}

// All library failures are reported through this exception; code() is the
// stable, machine-checkable part, what() carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace cautious
