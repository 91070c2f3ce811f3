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

#include "pardraft/ngram_trie.h"

#include "binary_io.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace pardraft {

using binary_io::put_u32;
using binary_io::put_u64;
using binary_io::put_varint;
using binary_io::varint_size;

namespace {

constexpr std::array<char, 8> kMagic = {'P', 'D', 'N', 'G', 'R', 'A', 'M', '\0'};

}  // namespace

double ContinuationView::probability(TokenId token) const {
  if (trie_ == nullptr || total_ == 0) return 0.0;
  const auto* begin = trie_->nodes_.data() + first_child_;
  const auto* end = begin + num_children_;
  const auto* it = std::lower_bound(
      begin, end, token,
      [](const NgramTrie::Node& n, TokenId t) { return n.token < t; });
  if (it == end || it->token != token) return 0.0;
  return static_cast<double>(it->count) / static_cast<double>(total_);
}

double ContinuationView::score(TokenId token) const {
  return std::log(probability(token) + kScoreEpsilon);
}

std::vector<ScoredToken> ContinuationView::scores() const {
  std::vector<ScoredToken> out;
  if (trie_ == nullptr || total_ == 0) return out;
  out.reserve(num_children_);
  const double total = static_cast<double>(total_);
  for (std::uint32_t c = 0; c < num_children_; ++c) {
    const auto& child = trie_->nodes_[first_child_ + c];
    out.push_back({child.token,
                   std::log(static_cast<double>(child.count) / total +
                            kScoreEpsilon)});
  }
  return out;
}

NgramTrie::NgramTrie(int order, int vocab_size)
    : order_(order), vocab_size_(vocab_size) {
  if (order < 2) {
    throw_error(ErrorCode::kInvalidConfig,
                "n-gram order must be >= 2, got " + std::to_string(order));
  }
  if (vocab_size < 1) {
    throw_error(ErrorCode::kInvalidConfig,
                "vocab size must be >= 1, got " + std::to_string(vocab_size));
  }
  nodes_.push_back(Node{});
}

NgramTrie NgramTrie::build(std::span<const TokenSequence> corpus, int order,
                           int vocab_size) {
  NgramTrie trie(order, vocab_size);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const TokenId t : corpus[i]) {
      if (t < 0 || t >= vocab_size) {
        throw_error(ErrorCode::kOutOfVocabulary,
                    "sequence " + std::to_string(i) + " contains token " +
                        std::to_string(t) + " outside vocab of size " +
                        std::to_string(vocab_size));
      }
    }
  }

  const auto n = static_cast<std::size_t>(order);
  std::vector<const TokenId*> windows;
  for (const auto& seq : corpus) {
    if (seq.size() < n) continue;
    for (std::size_t s = 0; s + n <= seq.size(); ++s) windows.push_back(seq.data() + s);
  }
  std::sort(windows.begin(), windows.end(),
            [n](const TokenId* a, const TokenId* b) {
              return std::lexicographical_compare(a, a + n, b, b + n);
            });

  // Sorted windows enumerate every level's distinct prefixes in order, so
  // each level comes out grouped by parent and sorted within a parent.
  std::vector<std::vector<LevelEntry>> levels(n);
  const TokenId* prev = nullptr;
  for (const TokenId* w : windows) {
    std::size_t shared = 0;
    if (prev != nullptr) {
      while (shared < n && prev[shared] == w[shared]) ++shared;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j < shared) {
        ++levels[j].back().count;
      } else {
        const auto parent =
            j == 0 ? 0u : static_cast<std::uint32_t>(levels[j - 1].size() - 1);
        levels[j].push_back({w[j], 1, parent});
      }
    }
    prev = w;
  }
  trie.assemble(windows.size(), levels);
  return trie;
}

void NgramTrie::assemble(std::uint64_t root_count,
                         const std::vector<std::vector<LevelEntry>>& levels) {
  std::size_t total = 1;
  std::vector<std::size_t> offset(levels.size());
  for (std::size_t j = 0; j < levels.size(); ++j) {
    offset[j] = total;
    total += levels[j].size();
  }
  if (total > UINT32_MAX) {
    throw_error(ErrorCode::kInvalidConfig, "trie exceeds 2^32 nodes");
  }
  nodes_.assign(total, Node{});
  nodes_[0].count = root_count;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    for (std::size_t idx = 0; idx < levels[j].size(); ++idx) {
      const LevelEntry& e = levels[j][idx];
      const auto id = static_cast<std::uint32_t>(offset[j] + idx);
      nodes_[id].token = e.token;
      nodes_[id].count = e.count;
      Node& parent = nodes_[j == 0 ? 0 : offset[j - 1] + e.parent];
      if (parent.num_children == 0) parent.first_child = id;
      ++parent.num_children;
      parent.child_total += e.count;
    }
  }
}

const NgramTrie::Node* NgramTrie::find_child(const Node& parent,
                                             TokenId token) const {
  const Node* begin = nodes_.data() + parent.first_child;
  const Node* end = begin + parent.num_children;
  const Node* it = std::lower_bound(
      begin, end, token, [](const Node& n, TokenId t) { return n.token < t; });
  if (it == end || it->token != token) return nullptr;
  return it;
}

ContinuationView NgramTrie::locate(std::span<const TokenId> context) const {
  const auto max_len = static_cast<std::size_t>(order_ - 1);
  if (context.size() > max_len) context = context.last(max_len);
  const Node* node = nodes_.data();
  for (const TokenId t : context) {
    node = find_child(*node, t);
    if (node == nullptr) return {};
  }
  ContinuationView view;
  if (node->num_children == 0) return view;
  view.trie_ = this;
  view.first_child_ = node->first_child;
  view.num_children_ = node->num_children;
  view.total_ = node->child_total;
  return view;
}

double NgramTrie::score(std::span<const TokenId> context, TokenId token) const {
  return locate(context).score(token);
}

std::vector<ScoredToken> NgramTrie::children_scores(
    std::span<const TokenId> context) const {
  return locate(context).scores();
}

std::uint64_t NgramTrie::path_count(std::span<const TokenId> path) const {
  const Node* node = nodes_.data();
  for (const TokenId t : path) {
    node = find_child(*node, t);
    if (node == nullptr) return 0;
  }
  return node->count;
}

TrieStats NgramTrie::stats() const {
  TrieStats s;
  s.node_count = nodes_.size();
  std::size_t frontier_begin = 0, frontier_size = 1;
  // Walk down order - 1 levels; levels are contiguous in nodes_.
  for (int depth = 0; depth < order_ - 1 && frontier_size > 0; ++depth) {
    std::size_t next_begin = 0, next_size = 0;
    for (std::size_t i = frontier_begin; i < frontier_begin + frontier_size; ++i) {
      if (nodes_[i].num_children == 0) continue;
      if (next_size == 0) next_begin = nodes_[i].first_child;
      next_size += nodes_[i].num_children;
    }
    frontier_begin = next_begin;
    frontier_size = next_size;
  }
  s.distinct_contexts = frontier_size;
  s.bytes_on_disk = serialized_size();
  return s;
}

std::uint64_t NgramTrie::serialized_size() const {
  std::uint64_t bytes = kMagic.size() + 4 + 4 + 4 + 8;
  for (const Node& n : nodes_) {
    bytes += varint_size(static_cast<std::uint32_t>(n.token)) +
             varint_size(n.count) + varint_size(n.num_children);
  }
  return bytes;
}

void NgramTrie::write_node(std::ostream& out, std::uint32_t id) const {
  const Node& n = nodes_[id];
  put_varint(out, static_cast<std::uint32_t>(n.token));
  put_varint(out, n.count);
  put_varint(out, n.num_children);
  for (std::uint32_t c = 0; c < n.num_children; ++c) write_node(out, n.first_child + c);
}

void NgramTrie::write(std::ostream& out) const {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(order_));
  put_u32(out, static_cast<std::uint32_t>(vocab_size_));
  put_u64(out, nodes_.size());
  write_node(out, 0);
  if (!out) throw_error(ErrorCode::kIo, "failed writing trie stream");
}

NgramTrie NgramTrie::read(std::istream& in) {
  binary_io::Reader r(in, "trie data");
  std::array<char, 8> magic{};
  for (auto& c : magic) c = static_cast<char>(r.byte());
  if (magic != kMagic) throw_error(ErrorCode::kBadMagic, "not an n-gram trie file");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw_error(ErrorCode::kVersionMismatch,
                "trie format version " + std::to_string(version) +
                    ", expected " + std::to_string(kFormatVersion));
  }
  const std::uint32_t order = r.u32();
  const std::uint32_t vocab = r.u32();
  const std::uint64_t node_count = r.u64();
  if (order < 2 || order > 64 || vocab < 1 || vocab > INT32_MAX || node_count < 1) {
    throw_error(ErrorCode::kCorruptFile, "implausible trie header");
  }

  NgramTrie trie;
  trie.order_ = static_cast<int>(order);
  trie.vocab_size_ = static_cast<int>(vocab);
  std::vector<std::vector<LevelEntry>> levels(order);
  std::uint64_t seen = 0;

  // Preorder appends each level's nodes in exactly the level-major order
  // assemble() expects.
  auto parse = [&](auto&& self, std::uint32_t depth, std::uint32_t parent,
                   std::uint64_t& count_out) -> void {
    const std::uint64_t token = r.varint();
    const std::uint64_t count = r.varint();
    const std::uint64_t children = r.varint();
    ++seen;
    if (seen > node_count) throw_error(ErrorCode::kCorruptFile, "more nodes than header declares");
    if (depth > 0 && token >= vocab) throw_error(ErrorCode::kCorruptFile, "token outside vocab");
    if (depth == order && children != 0) throw_error(ErrorCode::kCorruptFile, "trie deeper than order");
    if (depth > 0 && depth < order && children == 0) {
      throw_error(ErrorCode::kCorruptFile, "leaf above the n-gram order");
    }
    std::uint32_t index = 0;
    if (depth > 0) {
      auto& level = levels[depth - 1];
      level.push_back({static_cast<TokenId>(token), count, parent});
      index = static_cast<std::uint32_t>(level.size() - 1);
    }
    count_out = count;
    std::uint64_t sum = 0;
    std::int64_t last_token = -1;
    for (std::uint64_t c = 0; c < children; ++c) {
      std::uint64_t child_count = 0;
      self(self, depth + 1, index, child_count);
      const auto child_token = levels[depth].back().token;
      if (child_token <= last_token) throw_error(ErrorCode::kCorruptFile, "children out of order");
      last_token = child_token;
      sum += child_count;
    }
    if (children > 0 && sum != count) throw_error(ErrorCode::kCorruptFile, "child counts do not sum to parent");
  };
  std::uint64_t root_count = 0;
  parse(parse, 0, 0, root_count);
  if (seen != node_count) throw_error(ErrorCode::kCorruptFile, "node count mismatch");
  if (!r.at_end()) throw_error(ErrorCode::kCorruptFile, "trailing bytes after trie");
  trie.assemble(root_count, levels);
  return trie;
}

void NgramTrie::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write(out);
  out.flush();
  if (!out) throw_error(ErrorCode::kIo, "failed writing " + path.string());
}

NgramTrie NgramTrie::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorCode::kIo, "cannot open " + path.string());
  return read(in);
}

bool NgramTrie::operator==(const NgramTrie& other) const {
  return order_ == other.order_ && vocab_size_ == other.vocab_size_ &&
         nodes_ == other.nodes_;
}

}  // namespace pardraft
