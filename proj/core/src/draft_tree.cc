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

#include "pardraft/draft_tree.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "pardraft/ngram_trie.h"

namespace pardraft {

ParallelLogits::ParallelLogits(int draft_len, int vocab_size)
    : ParallelLogits(draft_len, vocab_size,
                     std::vector<double>(static_cast<std::size_t>(
                         std::max(draft_len, 0) * std::max(vocab_size, 0)))) {}

ParallelLogits::ParallelLogits(int draft_len, int vocab_size,
                               std::vector<double> values)
    : draft_len_(draft_len), vocab_size_(vocab_size), values_(std::move(values)) {
  if (draft_len < 1 || vocab_size < 1) {
    throw_error(ErrorCode::kShapeMismatch, "parallel logits need d >= 1 and V >= 1");
  }
  if (values_.size() != static_cast<std::size_t>(draft_len) * vocab_size) {
    throw_error(ErrorCode::kShapeMismatch,
                "expected " + std::to_string(draft_len) + "x" +
                    std::to_string(vocab_size) + " logits, got " +
                    std::to_string(values_.size()));
  }
}

void ParallelLogits::validate() const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw_error(ErrorCode::kInvalidConfig,
                  "non-finite logit in row " + std::to_string(i / vocab_size_));
    }
  }
}

void PruneConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw_error(ErrorCode::kInvalidConfig, what);
  };
  if (top_k < 1) fail("top_k must be >= 1");
  if (beam_width < 1) fail("beam_width must be >= 1");
  if (max_nodes < 1) fail("max_nodes must be >= 1");
  if (!(ngram_weight >= 0.0)) fail("ngram_weight must be >= 0");
  if (!(logit_decay > 0.0 && logit_decay <= 1.0)) fail("logit_decay must be in (0, 1]");
  if (!(level_exponent >= 0.0)) fail("level_exponent must be >= 0");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
}

std::vector<Candidate> top_k_candidates(std::span<const double> row, int k,
                                        double epsilon) {
  const int vocab = static_cast<int>(row.size());
  if (k < 1 || k > vocab) {
    throw_error(ErrorCode::kInvalidConfig,
                "top-k of " + std::to_string(k) + " over a vocab of " +
                    std::to_string(vocab));
  }
  const double max_logit = *std::max_element(row.begin(), row.end());
  double denom = 0.0;
  for (const double x : row) denom += std::exp(x - max_logit);

  std::vector<TokenId> ids(row.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::partial_sort(ids.begin(), ids.begin() + k, ids.end(),
                    [&](TokenId a, TokenId b) {
                      if (row[a] != row[b]) return row[a] > row[b];
                      return a < b;
                    });
  std::vector<Candidate> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    const TokenId t = ids[i];
    const double p = std::exp(row[t] - max_logit) / denom;
    out.push_back({t, std::log(p + epsilon), p});
  }
  return out;
}

double combine(double s_logit, double s_ng, int level, const PruneConfig& cfg) {
  const double w_logit = std::pow(cfg.logit_decay, level);
  const double w_level = std::pow(level + 1.0, -cfg.level_exponent);
  const double inc = (w_logit * s_logit + cfg.ngram_weight * s_ng) * w_level;
  return std::min(inc, 0.0);
}

int DraftTree::depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.level + 1);
  return d;
}

TokenSequence DraftTree::path_tokens(int index) const {
  TokenSequence path;
  for (int i = index; i != kRootParent; i = nodes[i].parent) {
    path.push_back(nodes[i].token);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

namespace {

struct PoolNode {
  int parent;
  TokenId token;
  int level;
  double score;
  double prob;
};

class Ranking {
 public:
  explicit Ranking(const std::vector<PoolNode>& pool) : pool_(pool) {}

  // True if a ranks strictly ahead of b.
  bool operator()(int a, int b) const {
    const PoolNode& x = pool_[a];
    const PoolNode& y = pool_[b];
    if (x.score != y.score) return x.score > y.score;
    if (x.level != y.level) return x.level < y.level;
    if (x.token != y.token) return x.token < y.token;
    return path_less(x.parent, y.parent);
  }

 private:
  // Lexicographic order of the token paths of two nodes on the same level.
  bool path_less(int a, int b) const {
    if (a == b || a == kRootParent || b == kRootParent) return false;
    const PoolNode& x = pool_[a];
    const PoolNode& y = pool_[b];
    if (x.parent != y.parent) {
      if (path_less(x.parent, y.parent)) return true;
      if (path_less(y.parent, x.parent)) return false;
    }
    return x.token < y.token;
  }

  const std::vector<PoolNode>& pool_;
};

void parallel_for(int n, int workers, const std::function<void(int, int)>& body) {
  if (workers <= 1 || n < 2) {
    body(0, n);
    return;
  }
  const int chunks = std::min(workers, n);
  std::vector<std::jthread> threads;
  threads.reserve(chunks - 1);
  const int step = (n + chunks - 1) / chunks;
  for (int c = 1; c < chunks; ++c) {
    const int begin = c * step;
    const int end = std::min(n, begin + step);
    if (begin < end) threads.emplace_back(body, begin, end);
  }
  body(0, std::min(n, step));
}

}  // namespace

DraftTree prune(const ParallelLogits& logits, const NgramTrie* trie,
                const PruneConfig& cfg, std::span<const TokenId> prefix,
                int workers) {
  cfg.validate();
  logits.validate();
  if (prefix.empty()) throw_error(ErrorCode::kInvalidConfig, "prune needs a nonempty prefix");

  const int k = cfg.top_k;
  const std::size_t ctx_len = trie ? static_cast<std::size_t>(trie->order() - 1) : 0;
  const double floor_score = std::log(cfg.epsilon);

  std::vector<PoolNode> pool;
  std::vector<int> active = {kRootParent};
  const Ranking ranks(pool);

  for (int level = 0; level < logits.draft_len(); ++level) {
    const auto cands = top_k_candidates(logits.row(level), k, cfg.epsilon);
    const std::size_t base = pool.size();
    const int n_active = static_cast<int>(active.size());
    pool.resize(base + static_cast<std::size_t>(n_active) * k);

    parallel_for(n_active, workers, [&](int begin, int end) {
      TokenSequence context;
      for (int a = begin; a < end; ++a) {
        const int parent = active[a];
        const double parent_score = parent == kRootParent ? 0.0 : pool[parent].score;
        ContinuationView view;
        if (trie != nullptr) {
          // Trailing order-1 tokens of prefix + path, crossing the boundary.
          context.clear();
          for (int i = parent; i != kRootParent && context.size() < ctx_len;
               i = pool[i].parent) {
            context.push_back(pool[i].token);
          }
          for (std::size_t i = prefix.size(); i > 0 && context.size() < ctx_len; --i) {
            context.push_back(prefix[i - 1]);
          }
          std::reverse(context.begin(), context.end());
          view = trie->locate(context);
        }
        for (int j = 0; j < k; ++j) {
          const Candidate& c = cands[j];
          const double s_ng = trie != nullptr
                                  ? std::log(view.probability(c.token) + cfg.epsilon)
                                  : floor_score;
          pool[base + static_cast<std::size_t>(a) * k + j] = {
              parent, c.token, level,
              parent_score + combine(c.log_score, s_ng, level, cfg), c.prob};
        }
      }
    });

    std::vector<int> expanded(pool.size() - base);
    std::iota(expanded.begin(), expanded.end(), static_cast<int>(base));
    const auto keep = std::min<std::size_t>(expanded.size(), cfg.beam_width);
    std::partial_sort(expanded.begin(), expanded.begin() + keep, expanded.end(), ranks);
    expanded.resize(keep);
    active = std::move(expanded);
  }

  std::vector<int> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), ranks);

  // Scores never increase along a path, so ancestors rank first; the parent
  // check still enforces closure without relying on that.
  std::vector<int> new_id(pool.size(), -1);
  DraftTree tree;
  for (const int id : order) {
    if (static_cast<int>(tree.nodes.size()) == cfg.max_nodes) break;
    const PoolNode& n = pool[id];
    if (n.parent != kRootParent && new_id[n.parent] < 0) continue;
    const int nid = static_cast<int>(tree.nodes.size());
    new_id[id] = nid;
    tree.nodes.push_back({nid, n.parent == kRootParent ? kRootParent : new_id[n.parent],
                          n.token, n.level, n.score, n.prob});
  }
  return tree;
}

TokenSequence LinearizedTree::context_for(std::span<const TokenId> prefix,
                                          std::size_t q) const {
  TokenSequence ctx(prefix.begin(), prefix.end());
  for (std::size_t kv = 0; kv <= q; ++kv) {
    if (visible(q, kv)) ctx.push_back(tokens[kv]);
  }
  return ctx;
}

LinearizedTree linearize(const DraftTree& tree, int prefix_len) {
  const std::size_t n = tree.size();
  std::unordered_map<int, int> index_of;
  index_of.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!index_of.emplace(tree.nodes[i].id, static_cast<int>(i)).second) {
      throw_error(ErrorCode::kInvalidTree,
                  "duplicate node id " + std::to_string(tree.nodes[i].id));
    }
  }
  std::vector<int> parent_index(n, kRootParent);
  for (std::size_t i = 0; i < n; ++i) {
    const TreeNode& node = tree.nodes[i];
    if (node.parent == kRootParent) {
      if (node.level != 0) {
        throw_error(ErrorCode::kInvalidTree,
                    "root child " + std::to_string(node.id) + " has level " +
                        std::to_string(node.level));
      }
      continue;
    }
    const auto it = index_of.find(node.parent);
    if (it == index_of.end()) {
      throw_error(ErrorCode::kInvalidTree, "node " + std::to_string(node.id) +
                                               " has missing parent " +
                                               std::to_string(node.parent));
    }
    parent_index[i] = it->second;
  }
  // Levels strictly increase from parent to child, which also rules out cycles.
  for (std::size_t i = 0; i < n; ++i) {
    if (parent_index[i] == kRootParent) continue;
    if (tree.nodes[i].level != tree.nodes[parent_index[i]].level + 1) {
      throw_error(ErrorCode::kInvalidTree,
                  "node " + std::to_string(tree.nodes[i].id) +
                      " is not one level below its parent");
    }
  }

  LinearizedTree lin;
  lin.prefix_len = prefix_len;
  lin.node_index.resize(n);
  std::iota(lin.node_index.begin(), lin.node_index.end(), 0);
  std::stable_sort(lin.node_index.begin(), lin.node_index.end(), [&](int a, int b) {
    return tree.nodes[a].level < tree.nodes[b].level;
  });
  std::vector<int> position(n);
  for (std::size_t j = 0; j < n; ++j) position[lin.node_index[j]] = static_cast<int>(j);

  lin.tokens.resize(n);
  lin.position_ids.resize(n);
  lin.parent.resize(n);
  lin.mask.assign(n * n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    const int i = lin.node_index[j];
    lin.tokens[j] = tree.nodes[i].token;
    lin.position_ids[j] = prefix_len + tree.nodes[i].level;
    lin.parent[j] = parent_index[i] == kRootParent ? kRootParent : position[parent_index[i]];
    for (int a = i; a != kRootParent; a = parent_index[a]) {
      lin.mask[j * n + position[a]] = 1;
    }
  }
  return lin;
}

std::string render_tree(const DraftTree& tree) {
  std::unordered_map<int, std::vector<int>> children;
  std::vector<int> roots;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const int p = tree.nodes[i].parent;
    if (p == kRootParent) {
      roots.push_back(static_cast<int>(i));
    } else {
      children[p].push_back(static_cast<int>(i));
    }
  }
  std::ostringstream out;
  out << "<prefix>\n";
  std::function<void(int, int)> emit = [&](int i, int indent) {
    const TreeNode& n = tree.nodes[i];
    char line[128];
    std::snprintf(line, sizeof(line), "%*s#%d tok=%d level=%d score=%.6f\n",
                  indent * 2, "", n.id, n.token, n.level, n.score);
    out << line;
    const auto it = children.find(n.id);
    if (it == children.end()) return;
    for (const int c : it->second) emit(c, indent + 1);
  };
  for (const int r : roots) emit(r, 1);
  return out.str();
}

std::string adjacency_listing(const DraftTree& tree) {
  std::ostringstream out;
  out << "# id parent token level score\n";
  for (const TreeNode& n : tree.nodes) {
    char line[128];
    std::snprintf(line, sizeof(line), "%d %d %d %d %.17g\n", n.id, n.parent,
                  n.token, n.level, n.score);
    out << line;
  }
  return out.str();
}

}  // namespace pardraft
