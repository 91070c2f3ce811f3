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

#ifndef PARDRAFT_TOOLS_COMMANDS_H_
#define PARDRAFT_TOOLS_COMMANDS_H_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pardraft/common.h"

namespace pardraft::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDivergence = 4;

int exit_code_for(ErrorCode code);

// Runs the pardraft command line. args[0] is the program name.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace pardraft::tools

#endif  // PARDRAFT_TOOLS_COMMANDS_H_
