#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fxcor {

enum class ErrorCode {
  kDimensionMismatch,
  kNotSquare,
  kSingularMatrix,
  kSingularSystem,
  kNoBracket,
  kNonFiniteState,
  kNonPositiveExponent,
  kNotSpanningTree,
  kConstructionFailed,
  kOutOfHorizon,
  kInfeasibleBudget,
  kNoSolution,
  kNotControllable,
  kRankDeficientB,
  kInvalidExponents,
  kGainTooSmall,
  kConditionFailed,
  kDegenerateRecursion,
  kNotHurwitz,
  kParseError,
  kSynthesisError,
  kIoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotSquare: return "NotSquare";
    case ErrorCode::kSingularMatrix: return "SingularMatrix";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kNoBracket: return "NoBracket";
    case ErrorCode::kNonFiniteState: return "NonFiniteState";
    case ErrorCode::kNonPositiveExponent: return "NonPositiveExponent";
    case ErrorCode::kNotSpanningTree: return "NotSpanningTree";
    case ErrorCode::kConstructionFailed: return "ConstructionFailed";
    case ErrorCode::kOutOfHorizon: return "OutOfHorizon";
    case ErrorCode::kInfeasibleBudget: return "InfeasibleBudget";
    case ErrorCode::kNoSolution: return "NoSolution";
    case ErrorCode::kNotControllable: return "NotControllable";
    case ErrorCode::kRankDeficientB: return "RankDeficientB";
    case ErrorCode::kInvalidExponents: return "InvalidExponents";
    case ErrorCode::kGainTooSmall: return "GainTooSmall";
    case ErrorCode::kConditionFailed: return "ConditionFailed";
    case ErrorCode::kDegenerateRecursion: return "DegenerateRecursion";
    case ErrorCode::kNotHurwitz: return "NotHurwitz";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSynthesisError: return "SynthesisError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fxcor
