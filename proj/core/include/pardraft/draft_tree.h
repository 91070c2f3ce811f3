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

#ifndef PARDRAFT_DRAFT_TREE_H_
#define PARDRAFT_DRAFT_TREE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pardraft/common.h"

namespace pardraft {

class NgramTrie;

// d rows of V draft logits produced by one draft forward; row i scores the
// token i + 1 positions past the committed prefix.
class ParallelLogits {
 public:
  ParallelLogits(int draft_len, int vocab_size);
  ParallelLogits(int draft_len, int vocab_size, std::vector<double> values);

  int draft_len() const { return draft_len_; }
  int vocab_size() const { return vocab_size_; }

  std::span<const double> row(int i) const {
    return {values_.data() + static_cast<std::size_t>(i) * vocab_size_,
            static_cast<std::size_t>(vocab_size_)};
  }
  std::span<double> row(int i) {
    return {values_.data() + static_cast<std::size_t>(i) * vocab_size_,
            static_cast<std::size_t>(vocab_size_)};
  }
  const std::vector<double>& values() const { return values_; }

  // Throws kInvalidConfig if any entry is not finite.
  void validate() const;

 private:
  int draft_len_;
  int vocab_size_;
  std::vector<double> values_;
};

// Defaults are the pruning constants used for full-scale decoding.
struct PruneConfig {
  int top_k = 25;
  int beam_width = 20;
  int max_nodes = 59;
  double ngram_weight = 0.5;
  double logit_decay = 0.9;
  double level_exponent = 0.7;
  double epsilon = kScoreEpsilon;

  void validate() const;
};

struct Candidate {
  TokenId token = 0;
  // log(softmax(row)[token] + epsilon)
  double log_score = 0.0;
  // softmax(row)[token]
  double prob = 0.0;
};

// The k highest-logit tokens of `row`, best first; ties go to the lower ID.
std::vector<Candidate> top_k_candidates(std::span<const double> row, int k,
                                        double epsilon = kScoreEpsilon);

// Score increment for extending a candidate at `level` (0 = first future
// position):
//   (logit_decay^level * s_logit + ngram_weight * s_ng)
//       * (level + 1)^-level_exponent,
// clamped to <= 0 so cumulative scores never rise along a path.
double combine(double s_logit, double s_ng, int level, const PruneConfig& cfg);

inline constexpr int kRootParent = -1;

struct TreeNode {
  int id = 0;
  int parent = kRootParent;
  TokenId token = 0;
  int level = 0;
  // Cumulative combined score from the prefix to this node.
  double score = 0.0;
  // Softmax probability of `token` in the draft row for `level`.
  double draft_prob = 0.0;

  bool operator==(const TreeNode&) const = default;
};

// Ancestor-closed draft token tree. Nodes produced by prune() carry
// id == index and are ordered best first, so parents precede children.
struct DraftTree {
  std::vector<TreeNode> nodes;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  int depth() const;
  // Tokens from the first level down to node `index` (requires id == index).
  TokenSequence path_tokens(int index) const;
};

// Continuity-aware pruning of parallel logits into a draft tree.
//
// Level-synchronous beam expansion: at level i every active candidate is
// extended by the top-k tokens of row i, scored with combine() against the
// n-gram continuation score of its trailing context (which may reach back
// into `prefix`). Every expansion enters a global pool; the beam keeps the
// top beam_width. The result is the best max_nodes pool nodes, closed under
// ancestors. Ranking everywhere is (higher score, lower level, lower token,
// lexicographically smaller parent path). A null trie scores every
// continuation at log(epsilon). `workers` > 1 expands candidates on threads;
// the output does not depend on it.
DraftTree prune(const ParallelLogits& logits, const NgramTrie* trie,
                const PruneConfig& cfg, std::span<const TokenId> prefix,
                int workers = 1);

// Tree in verification layout: parents before children, position IDs and the
// tree-attention mask over tree positions (prefix positions are always
// visible and not materialized).
struct LinearizedTree {
  int prefix_len = 0;
  // node_index[j] is the DraftTree index placed at linear position j.
  std::vector<int> node_index;
  TokenSequence tokens;
  std::vector<int> position_ids;
  // Linear position of each position's parent; kRootParent for level 0.
  std::vector<int> parent;
  // Row-major size() x size(); mask[q * size() + kv] != 0 iff kv is q or one
  // of q's ancestors.
  std::vector<std::uint8_t> mask;

  std::size_t size() const { return tokens.size(); }
  bool visible(std::size_t q, std::size_t kv) const {
    return mask[q * tokens.size() + kv] != 0;
  }
  // Prefix tokens plus the draft tokens on the path to linear position q.
  TokenSequence context_for(std::span<const TokenId> prefix,
                            std::size_t q) const;
};

// Throws kInvalidTree on duplicate IDs, dangling parents, cycles or
// inconsistent levels.
LinearizedTree linearize(const DraftTree& tree, int prefix_len);

// Indented human-readable rendering.
std::string render_tree(const DraftTree& tree);
// One "id parent token level score" line per node, scores round-trippable.
std::string adjacency_listing(const DraftTree& tree);

}  // namespace pardraft

#endif  // PARDRAFT_DRAFT_TREE_H_
