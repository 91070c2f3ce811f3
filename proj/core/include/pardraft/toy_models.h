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

#ifndef PARDRAFT_TOY_MODELS_H_
#define PARDRAFT_TOY_MODELS_H_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pardraft/common.h"
#include "pardraft/draft_tree.h"
#include "pardraft/target_model.h"

namespace pardraft {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MarkovTargetSpec {
  std::uint64_t seed = 0;
  int vocab_size = 8;
  // Number of previous tokens the next-token distribution depends on.
  int order = 1;
  // Scale of the Gaussian logits behind each transition row; larger is
  // peakier.
  double sharpness = 4.0;
};

// Order-k Markov chain standing in for a target LLM.
//
// Contexts shorter than k are left-padded with token 0. Feature rows are
// three width-8 vectors per context: a linear readout of the next-token
// distribution, a context-hash vector and a squashed mix of the two.
class MarkovTarget : public TargetModel {
 public:
  static constexpr int kFeatureWidth = 8;
  static constexpr int kEmbedDim = 8;

  explicit MarkovTarget(const MarkovTargetSpec& spec);

  const MarkovTargetSpec& spec() const { return spec_; }
  int order() const { return spec_.order; }
  int vocab_size() const override { return spec_.vocab_size; }
  std::vector<double> distribution(
      std::span<const TokenId> prefix) const override;
  int feature_dim() const override { return 3 * kFeatureWidth; }
  Eigen::MatrixXd features(std::span<const TokenId> tokens) const override;

  std::size_t num_contexts() const { return num_contexts_; }
  std::size_t context_id(std::span<const TokenId> prefix) const;
  std::size_t next_context(std::size_t ctx, TokenId token) const;
  std::span<const double> row(std::size_t ctx) const {
    return {table_.data() + ctx * spec_.vocab_size,
            static_cast<std::size_t>(spec_.vocab_size)};
  }
  // Frozen token embedding table (V x kEmbedDim) shared with draft models.
  const Eigen::MatrixXd& embedding() const { return embedding_; }

  // Sequences of `length` tokens sampled from the chain, each starting from
  // `order` uniformly random tokens. Temperature 0 decodes greedily.
  std::vector<TokenSequence> sample_corpus(int num_sequences, int length,
                                           std::uint64_t seed,
                                           double temperature = 1.0) const;

  // Expected probability of the most likely next token under the stationary
  // context distribution: the best achievable next-token accuracy.
  double greedy_accuracy_ceiling() const;

 private:
  MarkovTargetSpec spec_;
  std::size_t num_contexts_ = 0;
  std::vector<double> table_;
  Eigen::MatrixXd feature_table_;  // num_contexts x 24
  Eigen::MatrixXd embedding_;
};

MarkovTarget sample_markov_target(std::uint64_t seed, int vocab_size, int order,
                                  double sharpness = 4.0);

struct ToyDraftConfig {
  int vocab_size = 0;
  int feature_dim = 24;
  int proj_dim = 16;
  int embed_dim = MarkovTarget::kEmbedDim;
  int num_heads = 2;
  double rope_base = 100.0;
  // Shifted models read the first row from the last prefix position and the
  // rest from d - 1 mask slots; unshifted models read all d rows from d mask
  // slots.
  bool shifted = true;

  int model_dim() const { return proj_dim + embed_dim; }
  int head_dim() const { return model_dim() / num_heads; }
  void validate() const;
  bool operator==(const ToyDraftConfig&) const = default;
};

struct ToyDraftParams {
  Eigen::MatrixXd fc_w;      // proj_dim x feature_dim
  Eigen::VectorXd fc_b;      // proj_dim
  Eigen::VectorXd mask_emb;  // model_dim
  Eigen::MatrixXd wq, wk, wv, wo;  // model_dim x model_dim
  Eigen::MatrixXd head_w;    // vocab x model_dim
  Eigen::VectorXd head_b;    // vocab

  static ToyDraftParams zeros(const ToyDraftConfig& cfg);
  // Every trainable tensor as a flat view, in a fixed order.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t size() const;
  bool operator==(const ToyDraftParams& other) const;
};

inline constexpr int kMaskSlot = -1;

// One input sequence to the draft model: which prefix position (or mask)
// each slot holds, its position ID, and the slots it may attend to.
struct SequenceLayout {
  std::vector<int> source;
  std::vector<int> position_ids;
  std::vector<std::vector<int>> visible;

  std::size_t size() const { return source.size(); }
};

// Causal layout [prefix_0 .. prefix_{n-1}, mask x num_masks] with position
// IDs 0 .. n + num_masks - 1.
SequenceLayout inference_layout(int prefix_len, int num_masks);

// Parallel drafter: FC projection of the target features, shifted token
// embeddings, a learned mask embedding, one RoPE attention layer with a
// residual connection and a linear head. Slot j of the prefix carries
// [fc(features_j); embed(token_j)], so with shifted reading the last prefix
// slot predicts the next token and mask slot t predicts t tokens further.
class ToyDraft : public DraftPredictor {
 public:
  struct ForwardCache {
    // q and k are stored after the rotary rotation.
    RowMatrix x, q, k, v, attn_out, hidden;
    // attn[s * heads + h][i] weights slot s's i-th visible key.
    std::vector<std::vector<double>> attn;
  };

  ToyDraft(const ToyDraftConfig& cfg, Eigen::MatrixXd embedding,
           std::uint64_t seed);
  ToyDraft(const ToyDraft& other);
  ToyDraft& operator=(const ToyDraft& other);

  const ToyDraftConfig& config() const { return cfg_; }
  const ToyDraftParams& params() const { return params_; }
  ToyDraftParams& params() { return params_; }
  const Eigen::MatrixXd& embedding() const { return embedding_; }

  ParallelLogits predict(std::span<const TokenId> prefix,
                         const TargetModel& target,
                         int draft_len) const override;

  int num_masks(int draft_len) const {
    return cfg_.shifted ? draft_len - 1 : draft_len;
  }
  // Inference-layout slots the d rows are read from.
  std::vector<int> read_slots(int prefix_len, int draft_len) const;

  // Logits for every slot (slots x V). `features` rows and `tokens` are
  // indexed by the layout's prefix sources.
  RowMatrix forward(const SequenceLayout& layout,
                    std::span<const TokenId> tokens,
                    const Eigen::MatrixXd& features,
                    ForwardCache* cache = nullptr) const;
  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
  void backward(const SequenceLayout& layout, const ForwardCache& cache,
                const Eigen::MatrixXd& features, const RowMatrix& dlogits,
                ToyDraftParams& grad) const;

  std::uint64_t attention_calls() const {
    return attention_calls_.load(std::memory_order_relaxed);
  }

  void write(std::ostream& out) const;
  static ToyDraft read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static ToyDraft load(const std::filesystem::path& path);

 private:
  ToyDraft() = default;
  void rotate(RowMatrix& m, std::span<const int> positions,
              bool inverse) const;

  ToyDraftConfig cfg_;
  Eigen::MatrixXd embedding_;
  ToyDraftParams params_;
  mutable std::atomic<std::uint64_t> attention_calls_{0};
};

// Emits log q along the target's own greedy chain, so row i's argmax is the
// greedy token i steps ahead. Row distributions match the target exactly.
class OracleDrafter : public DraftPredictor {
 public:
  explicit OracleDrafter(double temperature = 1.0) : temperature_(temperature) {}
  ParallelLogits predict(std::span<const TokenId> prefix,
                         const TargetModel& target,
                         int draft_len) const override;

 private:
  double temperature_;
};

// Negated oracle: every row prefers the target's least likely token.
class AdversarialDrafter : public DraftPredictor {
 public:
  ParallelLogits predict(std::span<const TokenId> prefix,
                         const TargetModel& target,
                         int draft_len) const override;
};

// Gaussian noise logits, seeded by (seed, prefix) so repeated calls agree.
class UniformDrafter : public DraftPredictor {
 public:
  explicit UniformDrafter(std::uint64_t seed, double scale = 1.0)
      : seed_(seed), scale_(scale) {}
  ParallelLogits predict(std::span<const TokenId> prefix,
                         const TargetModel& target,
                         int draft_len) const override;

 private:
  std::uint64_t seed_;
  double scale_;
};

// Exact per-position marginals of a Markov target: the best factorized
// parallel prediction, which ignores how the positions fit together.
class MarginalDrafter : public DraftPredictor {
 public:
  explicit MarginalDrafter(const MarkovTarget& target) : target_(target) {}
  ParallelLogits predict(std::span<const TokenId> prefix,
                         const TargetModel& target,
                         int draft_len) const override;

 private:
  const MarkovTarget& target_;
};

// Adds seeded Gaussian noise to another drafter's logits.
class NoisyDrafter : public DraftPredictor {
 public:
  NoisyDrafter(const DraftPredictor& base, double noise, std::uint64_t seed)
      : base_(base), noise_(noise), seed_(seed) {}
  ParallelLogits predict(std::span<const TokenId> prefix,
                         const TargetModel& target,
                         int draft_len) const override;

 private:
  const DraftPredictor& base_;
  double noise_;
  std::uint64_t seed_;
};

// Deterministic 64-bit mix of a seed and a token sequence.
std::uint64_t hash_tokens(std::uint64_t seed, std::span<const TokenId> tokens);

}  // namespace pardraft

#endif  // PARDRAFT_TOY_MODELS_H_
