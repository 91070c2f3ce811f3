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

#ifndef PARDRAFT_SPEC_ENGINE_H_
#define PARDRAFT_SPEC_ENGINE_H_

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "pardraft/common.h"
#include "pardraft/draft_tree.h"
#include "pardraft/target_model.h"

namespace pardraft {

class NgramTrie;

struct VerifyResult {
  // Accepted draft tokens, root to deepest accepted node.
  TokenSequence accepted;
  // Linear positions of the accepted nodes.
  std::vector<int> accepted_positions;
  TokenId bonus = 0;
  // Target distributions evaluated: one per tree node plus the root.
  int target_calls = 0;
  // Wall time of the root distribution call (one plain autoregressive step).
  double root_call_us = 0.0;
};

// Walks the draft tree against the target.
//
// Temperature 0 follows the child matching the target argmax until none
// matches; the argmax at the stopping node is the bonus token. Temperature
// > 0 runs recursive rejection sampling over each node's children: a child
// is drawn from the draft probabilities renormalized over the remaining
// children, accepted with probability min(1, residual(t) / draft(t)), and
// on rejection the residual becomes norm(max(0, residual - draft)) and the
// child is removed. If every child is rejected the bonus token is drawn from
// the residual. The emitted (accepted path, bonus) is distributed exactly as
// ancestral sampling from the tempered target.
VerifyResult verify(const DraftTree& tree, const LinearizedTree& lin,
                    std::span<const TokenId> prefix, const TargetModel& target,
                    double temperature, std::mt19937_64& rng);

struct DecodeConfig {
  int draft_len = 8;
  double temperature = 0.0;
  int max_tokens = 128;
  std::uint64_t seed = 0;
  // Token that ends decoding; negative disables.
  TokenId eos_token = -1;
  PruneConfig prune;
  int prune_workers = 1;

  void validate() const;
};

struct CycleRecord {
  int accepted = 0;
  // Tokens appended this cycle: accepted + bonus, minus any truncation at
  // max_tokens or after an end token.
  int emitted = 0;
  int tree_size = 0;
  double draft_us = 0.0;
  double prune_us = 0.0;
  double verify_us = 0.0;
  double base_us = 0.0;
};

struct DecodeMetrics {
  int cycles = 0;
  int tokens_out = 0;
  double tau = 0.0;
  // Medians over cycles, the first (warmup) cycle excluded when there are
  // at least two.
  double median_draft_us = 0.0;
  double median_prune_us = 0.0;
  double median_verify_us = 0.0;
  double median_base_us = 0.0;
  double modeled_speedup = 0.0;
  double draft_ratio = 0.0;
  std::vector<CycleRecord> records;
};

struct DecodeResult {
  // Generated tokens only; the prompt is not repeated.
  TokenSequence tokens;
  DecodeMetrics metrics;
};

// Draft -> prune -> verify until max_tokens or the end token. A null trie
// scores every continuation at the epsilon floor.
DecodeResult decode(std::span<const TokenId> prompt, const TargetModel& target,
                    const DraftPredictor& drafter, const NgramTrie* trie,
                    const DecodeConfig& cfg);

// Plain one-token-per-step decoding with the same sampling conventions.
TokenSequence autoregressive_decode(std::span<const TokenId> prompt,
                                    const TargetModel& target,
                                    const DecodeConfig& cfg);

struct ExactnessReport {
  // Total-variation distance; 1.0 with defined == false when no samples ran.
  double tv = 1.0;
  bool defined = false;
  int samples = 0;
  std::size_t outcomes = 0;
};

// Decodes cfg.max_tokens tokens n_samples times (seeds cfg.seed + i) and
// compares the empirical sequence distribution with the exactly enumerated
// tempered target distribution. Requires temperature > 0 and at most 2^20
// possible outputs.
ExactnessReport exactness_check(std::span<const TokenId> prompt,
                                const TargetModel& target,
                                const DraftPredictor& drafter,
                                const NgramTrie* trie, const DecodeConfig& cfg,
                                int n_samples);

struct SpeedupEstimate {
  double speedup = 0.0;
  double draft_ratio = 0.0;
};

// speedup = tau * t_base / (t_verify + t_draft + t_prune)
// draft_ratio = (t_draft + t_prune) / (t_verify + t_draft + t_prune)
// t_verify and t_base must be > 0, t_draft and t_prune >= 0, tau >= 1.
SpeedupEstimate estimate_speedup(double tau, double t_verify, double t_draft,
                                 double t_prune, double t_base);

void write_metrics_report(std::ostream& out, const DecodeMetrics& m);
// One JSON object per cycle.
void write_cycle_records(std::ostream& out, const DecodeMetrics& m);

}  // namespace pardraft

#endif  // PARDRAFT_SPEC_ENGINE_H_
