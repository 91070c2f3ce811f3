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

#ifndef PARDRAFT_TOOLS_RUN_CONFIG_H_
#define PARDRAFT_TOOLS_RUN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

#include "pardraft/spec_engine.h"
#include "pardraft/toy_models.h"
#include "pardraft/training.h"

namespace pardraft::tools {

struct PathsConfig {
  std::optional<std::filesystem::path> trie;
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> log;
};

// Synthetic sequences drawn from the toy target when no corpus file is given.
struct DataConfig {
  int num_sequences = 64;
  int sequence_length = 32;
  std::uint64_t seed = 1;
  // 0 samples greedy sequences.
  double temperature = 1.0;
};

struct TrainSection {
  TrainConfig train;
  ToyDraftConfig draft;
  DataConfig data;
};

struct EvalSection {
  DataConfig data{128, 32, 2, 1.0};
  int min_prefix = 1;
  int decode_prompts = 16;
};

struct RunConfig {
  std::uint64_t seed = 0;
  MarkovTargetSpec target;
  PruneConfig prune;
  DecodeConfig decode;
  TrainSection train;
  EvalSection eval;
  PathsConfig paths;

  void validate() const;
};

// Defaults: k = 25, w = 20, theta = 59, w_ng = 0.5, gamma = 0.6, d = 8, and a
// 32-token order-1 toy target.
RunConfig default_run_config();

// JSON object with optional sections "target", "prune", "decode", "train",
// "eval", "paths" and a top-level "seed". Unknown keys are rejected with
// ErrorCode::kInvalidConfig. Relative paths resolve against the file's
// directory.
RunConfig parse_run_config(std::string_view json_text,
                           const std::filesystem::path& base_dir = {},
                           const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);

enum class PathRole { kTrie, kModel, kCorpus };
// Throws ErrorCode::kIo when a configured input path does not exist.
void require_existing(const RunConfig& cfg, std::initializer_list<PathRole> roles);

}  // namespace pardraft::tools

#endif  // PARDRAFT_TOOLS_RUN_CONFIG_H_
