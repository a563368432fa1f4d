/*
 * Copyright 2026 The truncdr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace truncdr {

enum class ErrorCode {
  // input
  kMissingColumn,
  kNonNumericCell,
  kInvariantViolation,
  kTauTooSmall,
  kWrongCensoringTag,
  kBadK,
  kBadEps,
  kBadArgument,
  kUnknownScenario,
  // estimation
  kNoEvents,
  kNoCovariates,
  kSingularHessian,
  kStratumTooSmall,
  kDegenerateDenominator,
  kNoComparablePairs,
  kTooManyFailures,
  kFoldFailure,
  // positivity
  kOverlapViolation,
  kCensoringPositivityViolation,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kNonNumericCell: return "NonNumericCell";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kTauTooSmall: return "TauTooSmall";
    case ErrorCode::kWrongCensoringTag: return "WrongCensoringTag";
    case ErrorCode::kBadK: return "BadK";
    case ErrorCode::kBadEps: return "BadEps";
    case ErrorCode::kBadArgument: return "BadArgument";
    case ErrorCode::kUnknownScenario: return "UnknownScenario";
    case ErrorCode::kNoEvents: return "NoEvents";
    case ErrorCode::kNoCovariates: return "NoCovariates";
    case ErrorCode::kSingularHessian: return "SingularHessian";
    case ErrorCode::kStratumTooSmall: return "StratumTooSmall";
    case ErrorCode::kDegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::kNoComparablePairs: return "NoComparablePairs";
    case ErrorCode::kTooManyFailures: return "TooManyFailures";
    case ErrorCode::kFoldFailure: return "FoldFailure";
    case ErrorCode::kOverlapViolation: return "OverlapViolation";
    case ErrorCode::kCensoringPositivityViolation: return "CensoringPositivityViolation";
  }
  return "Unknown";
}

// Coarse classification used for CLI exit codes.
enum class ErrorClass { kInput, kEstimation, kOverlap };

inline ErrorClass classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingColumn:
    case ErrorCode::kNonNumericCell:
    case ErrorCode::kInvariantViolation:
    case ErrorCode::kTauTooSmall:
    case ErrorCode::kWrongCensoringTag:
    case ErrorCode::kBadK:
    case ErrorCode::kBadEps:
    case ErrorCode::kBadArgument:
    case ErrorCode::kUnknownScenario:
      return ErrorClass::kInput;
    case ErrorCode::kOverlapViolation:
    case ErrorCode::kCensoringPositivityViolation:
      return ErrorClass::kOverlap;
    default:
      return ErrorClass::kEstimation;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

}  // namespace truncdr
