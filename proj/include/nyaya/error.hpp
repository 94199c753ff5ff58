#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nyaya {

/// Every failure the library reports carries one of these codes.
enum class Errc {
  // corpus
  MalformedRecord,
  DuplicateId,
  // gateway
  InvalidRequest,
  EmptyBatch,
  Timeout,
  RateLimited,
  ProviderUnavailable,
  HttpStatus,
  MalformedProviderResponse,
  ExhaustedRetries,
  DimensionMismatch,
  // summarizer
  MissingFacts,
  MissingText,
  // retrieval
  ZeroVector,
  EmptyIndex,
  IoFailure,
  CorruptIndex,
  // pipeline
  MissingSummary,
  MissingIndex,
  EmptyContext,
  UnknownPipeline,
  // judgment / evaluation
  FatalConfig,
  MissingGold,
  EmptyReference,
  MissingReference,
  EmptyRun,
  JudgeParseFailure,
  // agreement
  InvalidMatrix,
  IncompleteMatrix,
  InsufficientOverlap,
  ZeroVariance,
  InsufficientData,
  // persistence / config
  CorruptStore,
  BadConfig,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::InvalidRequest: return "InvalidRequest";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::Timeout: return "Timeout";
    case Errc::RateLimited: return "RateLimited";
    case Errc::ProviderUnavailable: return "ProviderUnavailable";
    case Errc::HttpStatus: return "HttpStatus";
    case Errc::MalformedProviderResponse: return "MalformedProviderResponse";
    case Errc::ExhaustedRetries: return "ExhaustedRetries";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::MissingFacts: return "MissingFacts";
    case Errc::MissingText: return "MissingText";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::EmptyIndex: return "EmptyIndex";
    case Errc::IoFailure: return "IoFailure";
    case Errc::CorruptIndex: return "CorruptIndex";
    case Errc::MissingSummary: return "MissingSummary";
    case Errc::MissingIndex: return "MissingIndex";
    case Errc::EmptyContext: return "EmptyContext";
    case Errc::UnknownPipeline: return "UnknownPipeline";
    case Errc::FatalConfig: return "FatalConfig";
    case Errc::MissingGold: return "MissingGold";
    case Errc::EmptyReference: return "EmptyReference";
    case Errc::MissingReference: return "MissingReference";
    case Errc::EmptyRun: return "EmptyRun";
    case Errc::JudgeParseFailure: return "JudgeParseFailure";
    case Errc::InvalidMatrix: return "InvalidMatrix";
    case Errc::IncompleteMatrix: return "IncompleteMatrix";
    case Errc::InsufficientOverlap: return "InsufficientOverlap";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::CorruptStore: return "CorruptStore";
    case Errc::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// True for failures worth retrying against a remote provider.
inline bool is_transient(Errc code) noexcept {
  return code == Errc::Timeout || code == Errc::RateLimited || code == Errc::ProviderUnavailable;
}

}  // namespace nyaya
