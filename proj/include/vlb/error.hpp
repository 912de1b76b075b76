#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vlb {

enum class ErrorCode {
  DegenerateGeometry,
  InsufficientObservations,
  InsufficientCorrespondences,
  NoConsensus,
  InvalidSpec,
  EmptyGallery,
  DegenerateOrientation,
  MissingBaseline,
  ConfigError,
  IoError,
  ChecksumMismatch,
  SchemaVersion,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying one of the library's error codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::InsufficientObservations: return "InsufficientObservations";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::EmptyGallery: return "EmptyGallery";
    case ErrorCode::DegenerateOrientation: return "DegenerateOrientation";
    case ErrorCode::MissingBaseline: return "MissingBaseline";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::SchemaVersion: return "SchemaVersion";
  }
  return "Unknown";
}

}  // namespace vlb
