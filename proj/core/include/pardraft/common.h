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

#ifndef PARDRAFT_COMMON_H_
#define PARDRAFT_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pardraft {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

// Floor added inside every log-probability score.
inline constexpr double kScoreEpsilon = 1e-9;

enum class ErrorCode {
  kInvalidConfig,
  kOutOfVocabulary,
  kBadMagic,
  kTruncatedFile,
  kVersionMismatch,
  kCorruptFile,
  kInvalidTree,
  kShapeMismatch,
  kIo,
  kDivergence,
};

const char* error_code_name(ErrorCode code);

// Base of every error thrown by the library. The code lets callers (the CLI
// in particular) map failures onto exit statuses without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void throw_error(ErrorCode code, const std::string& what);

}  // namespace pardraft

#endif  // PARDRAFT_COMMON_H_
