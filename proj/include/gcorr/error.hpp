#pragma once

#include <stdexcept>
#include <string>

namespace gcorr {

enum class ErrorCode {
  // data / configuration problems
  DuplicateCell,
  NegativeCount,
  NonIntegerCount,
  UnknownColumn,
  MalformedInput,
  InvalidFactor,
  OutcomeNotBinary,
  UnknownFactor,
  NonHierarchical,
  DimensionMismatch,
  TooManyFactors,
  InvalidArgument,
  // numerical problems
  RankDeficient,
  NonFinitePosterior,
  ModeNotFound,
  BlockStructure,
  TooFewDraws,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::NegativeCount: return "NegativeCount";
    case ErrorCode::NonIntegerCount: return "NonIntegerCount";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::InvalidFactor: return "InvalidFactor";
    case ErrorCode::OutcomeNotBinary: return "OutcomeNotBinary";
    case ErrorCode::UnknownFactor: return "UnknownFactor";
    case ErrorCode::NonHierarchical: return "NonHierarchical";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooManyFactors: return "TooManyFactors";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonFinitePosterior: return "NonFinitePosterior";
    case ErrorCode::ModeNotFound: return "ModeNotFound";
    case ErrorCode::BlockStructure: return "BlockStructure";
    case ErrorCode::TooFewDraws: return "TooFewDraws";
  }
  return "Unknown";
}

/// True for failures of the numerical machinery rather than of the inputs.
inline bool is_numerical(ErrorCode c) {
  return c == ErrorCode::RankDeficient || c == ErrorCode::NonFinitePosterior ||
         c == ErrorCode::ModeNotFound || c == ErrorCode::BlockStructure;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gcorr
