// Copyright 2026 The FedFair Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedfair {

enum class ErrorCode {
  kInvalidArgument,
  kEmptyStratum,
  kEmptyGlobalStratum,
  kSketchIncompatible,
  kEmptySketch,
  kOracleUnsupported,
  kShiftUndefined,
  kNoCertifiedClassifier,
  kParse,
  kIo,
};

/// Stable kebab-case name, used in diagnostics and CLI messages.
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code name.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid-argument";
    case ErrorCode::kEmptyStratum:
      return "empty-stratum";
    case ErrorCode::kEmptyGlobalStratum:
      return "empty-global-stratum";
    case ErrorCode::kSketchIncompatible:
      return "sketch-incompatible";
    case ErrorCode::kEmptySketch:
      return "empty-sketch";
    case ErrorCode::kOracleUnsupported:
      return "oracle-unsupported";
    case ErrorCode::kShiftUndefined:
      return "shift-undefined";
    case ErrorCode::kNoCertifiedClassifier:
      return "no-certified-classifier";
    case ErrorCode::kParse:
      return "parse-error";
    case ErrorCode::kIo:
      return "io-error";
  }
  return "unknown";
}

}  // namespace fedfair
