// Copyright 2026 The pardraft Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pardraft/common.h"

namespace pardraft {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
      return "invalid-config";
    case ErrorCode::kOutOfVocabulary:
      return "out-of-vocabulary";
    case ErrorCode::kBadMagic:
      return "bad-magic";
    case ErrorCode::kTruncatedFile:
      return "truncated-file";
    case ErrorCode::kVersionMismatch:
      return "version-mismatch";
    case ErrorCode::kCorruptFile:
      return "corrupt-file";
    case ErrorCode::kInvalidTree:
      return "invalid-tree";
    case ErrorCode::kShapeMismatch:
      return "shape-mismatch";
    case ErrorCode::kIo:
      return "io";
    case ErrorCode::kDivergence:
      return "divergence";
  }
  return "unknown";
}

void throw_error(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(error_code_name(code)) + ": " + what);
}

}  // namespace pardraft
