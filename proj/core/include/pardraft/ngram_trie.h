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

#ifndef PARDRAFT_NGRAM_TRIE_H_
#define PARDRAFT_NGRAM_TRIE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "pardraft/common.h"

namespace pardraft {

struct TrieStats {
  std::uint64_t node_count = 0;
  // Number of distinct (order - 1)-token contexts that were observed.
  std::uint64_t distinct_contexts = 0;
  // Size of the binary serialization, whether or not it has been written.
  std::uint64_t bytes_on_disk = 0;

  bool operator==(const TrieStats&) const = default;
};

struct ScoredToken {
  TokenId token = 0;
  double score = 0.0;

  bool operator==(const ScoredToken&) const = default;
};

class NgramTrie;

// A node located by one descent from the root. Scoring any number of
// continuations through the view costs no further descents.
class ContinuationView {
 public:
  bool found() const { return trie_ != nullptr; }
  std::size_t num_children() const { return num_children_; }
  std::uint64_t total_count() const { return total_; }

  // Pr(token | context) under raw maximum-likelihood counts; 0 if unseen.
  double probability(TokenId token) const;
  // log(Pr(token | context) + epsilon).
  double score(TokenId token) const;
  // Scores of every observed continuation, ascending by token.
  std::vector<ScoredToken> scores() const;

 private:
  friend class NgramTrie;
  const NgramTrie* trie_ = nullptr;
  std::uint32_t first_child_ = 0;
  std::uint32_t num_children_ = 0;
  std::uint64_t total_ = 0;
};

// Count-based n-gram trie over abstract token IDs.
//
// Every length-`order` window of the corpus increments the count of each node
// on its root-to-leaf path, so a node's count is the number of windows that
// start with the node's path and every internal node's child total equals the
// sum of its children's counts. Nodes are stored level by level with each
// parent's children contiguous and sorted by token, which makes a context
// descent a sequence of binary searches. The structure is immutable after
// construction and safe to query concurrently.
class NgramTrie {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  // Root-only trie.
  NgramTrie(int order, int vocab_size);

  static NgramTrie build(std::span<const TokenSequence> corpus, int order,
                         int vocab_size);

  int order() const { return order_; }
  int vocab_size() const { return vocab_size_; }
  std::size_t node_count() const { return nodes_.size(); }
  TrieStats stats() const;

  // Only the trailing order - 1 tokens of `context` are used. Shorter contexts
  // descend as far as they go.
  ContinuationView locate(std::span<const TokenId> context) const;
  double score(std::span<const TokenId> context, TokenId token) const;
  std::vector<ScoredToken> children_scores(
      std::span<const TokenId> context) const;

  // Count stored at the node reached by `path` from the root, 0 if absent.
  std::uint64_t path_count(std::span<const TokenId> path) const;

  // Calls fn(path) for every node at `depth`, in lexicographic order.
  template <typename Fn>
  void for_each_path(int depth, Fn&& fn) const {
    TokenSequence path;
    visit_paths(0, depth, path, fn);
  }

  void write(std::ostream& out) const;
  static NgramTrie read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static NgramTrie load(const std::filesystem::path& path);

  bool operator==(const NgramTrie& other) const;

 private:
  friend class ContinuationView;

  struct Node {
    TokenId token = 0;
    std::uint32_t first_child = 0;
    std::uint32_t num_children = 0;
    std::uint64_t count = 0;
    std::uint64_t child_total = 0;

    bool operator==(const Node&) const = default;
  };

  // One node of a level-ordered trie under construction; `parent` indexes the
  // previous level.
  struct LevelEntry {
    TokenId token;
    std::uint64_t count;
    std::uint32_t parent;
  };

  NgramTrie() = default;

  void assemble(std::uint64_t root_count,
                const std::vector<std::vector<LevelEntry>>& levels);
  const Node* find_child(const Node& parent, TokenId token) const;
  std::uint64_t serialized_size() const;
  void write_node(std::ostream& out, std::uint32_t id) const;

  template <typename Fn>
  void visit_paths(std::uint32_t id, int depth, TokenSequence& path,
                   Fn& fn) const {
    if (static_cast<int>(path.size()) == depth) {
      fn(std::span<const TokenId>(path));
      return;
    }
    const Node& node = nodes_[id];
    for (std::uint32_t c = 0; c < node.num_children; ++c) {
      const std::uint32_t child = node.first_child + c;
      path.push_back(nodes_[child].token);
      visit_paths(child, depth, path, fn);
      path.pop_back();
    }
  }

  int order_ = 0;
  int vocab_size_ = 0;
  std::vector<Node> nodes_;
};

}  // namespace pardraft

#endif  // PARDRAFT_NGRAM_TRIE_H_
