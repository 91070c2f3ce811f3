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

#ifndef PARDRAFT_TRAINING_H_
#define PARDRAFT_TRAINING_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "pardraft/common.h"
#include "pardraft/toy_models.h"

namespace pardraft {

// Dense row-major boolean matrix; entry (q, kv) is true when query slot q may
// attend to key slot kv.
class BoolMatrix {
 public:
  BoolMatrix() = default;
  BoolMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool operator()(int r, int c) const { return data_[r * cols_ + c] != 0; }
  void set(int r, int c, bool v) { data_[r * cols_ + c] = v ? 1 : 0; }
  std::size_t count() const;
  bool operator==(const BoolMatrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> data_;
};

// Prefix-shared training layout for one sequence: P prompt slots followed by
// one block of `block_len` mask slots per prompt position, P * (block_len + 1)
// slots in total. Block g may see prompt slots 0..g and itself causally;
// blocks never see each other. Everything at or beyond valid_len is masked.
namespace mask_predicates {
bool prompt_causal(int prompt_len, int valid_len, int q, int kv);
bool draft_view_prompt(int prompt_len, int block_len, int valid_len, int q, int kv);
bool draft_internal_causal(int prompt_len, int block_len, int valid_len, int q, int kv);
}  // namespace mask_predicates

BoolMatrix build_training_mask(int prompt_len, int block_len, int valid_len);
// Prompt slots carry 0..P-1; block g carries g+1 .. g+block_len.
std::vector<int> build_position_ids(int prompt_len, int block_len);

struct AnnealedKLConfig {
  double gamma = 0.6;
  int draft_len = 8;

  void validate() const;
  // lambda_t = gamma^(t-1) for t = 1..draft_len.
  std::vector<double> weights() const;
};

struct KLResult {
  double loss = 0.0;
  // Set when some p(v) was zero where q(v) > 0 and the log was floored.
  bool floored = false;
};

// sum_t lambda_t KL(q_t || p_t) over aligned rows of probabilities.
KLResult annealed_kl(std::span<const std::vector<double>> draft,
                     std::span<const std::vector<double>> target,
                     const AnnealedKLConfig& cfg);

// Same objective from draft logits; d(loss)/d(logits) is written to `grad`
// (lambda_t * (softmax(logits_t) - q_t)) when it is non-null.
double annealed_kl_from_logits(const RowMatrix& logits,
                               std::span<const std::vector<double>> target,
                               const AnnealedKLConfig& cfg, RowMatrix* grad);

// One supervised output slot: its row in the layout, draft position t
// (1-based) and the number of sequence tokens its soft label conditions on.
struct Supervision {
  int slot = 0;
  int position = 0;
  int context_len = 0;
};

struct TrainingLayout {
  SequenceLayout layout;
  std::vector<Supervision> supervised;
};

// Layout of one length-P sequence for a model reading `draft_len` rows.
// Shifted models use blocks of draft_len - 1 masks and supervise prompt slots
// as position 1; unshifted models use draft_len masks and leave prompt slots
// unsupervised. Labels whose context runs past the sequence are dropped.
TrainingLayout training_layout(int prompt_len, int draft_len, bool shifted);

enum class Optimizer { kGradientDescent, kAdam };

struct TrainConfig {
  AnnealedKLConfig kl;
  int steps = 2000;
  Optimizer optimizer = Optimizer::kGradientDescent;
  double learning_rate = 0.1;
  // Adam moment decay rates; ignored by plain gradient descent.
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  // Log every this many steps (and at the first and last step); 0 disables.
  int log_every = 100;
};

struct TrainRecord {
  int step = 0;
  double loss = 0.0;
  // Argmax accuracy of each draft position against the sequence's own next
  // tokens, measured on the training batch before the update.
  std::vector<double> accuracy;
};

struct BatchResult {
  double loss = 0.0;
  std::vector<double> accuracy;
};

// Mean annealed KL over every (sequence, prefix) block in the batch.
// Gradients are accumulated into `grad` when it is non-null.
BatchResult batch_loss(const ToyDraft& model, const MarkovTarget& target,
                       std::span<const TokenSequence> batch, const AnnealedKLConfig& cfg,
                       ToyDraftParams* grad);

using TrainCallback = std::function<void(const TrainRecord&, const ToyDraft&)>;

// Full-batch gradient descent (plain or Adam) on the annealed KL objective. Throws
// ErrorCode::kDivergence when the loss becomes non-finite or exceeds ten times
// its initial value.
ToyDraft train_toy_draft(const MarkovTarget& target, std::span<const TokenSequence> corpus,
                         ToyDraft model, const TrainConfig& cfg,
                         const TrainCallback& on_record = {});

// Convenience overload that initializes a model from `draft_cfg`.
ToyDraft train_toy_draft(const MarkovTarget& target, std::span<const TokenSequence> corpus,
                         const ToyDraftConfig& draft_cfg, const TrainConfig& cfg,
                         const TrainCallback& on_record = {});

// Maximum relative error between analytic and central-difference gradients
// over `samples` randomly chosen parameters. The relative error uses
// max(|a|, |n|, 1e-6) in the denominator.
double finite_diff_check(const ToyDraft& model, const MarkovTarget& target,
                         std::span<const TokenSequence> batch, const AnnealedKLConfig& cfg,
                         double h, int samples, std::uint64_t seed);

struct AccuracyReport {
  // alpha[t-1]: fraction of held-out prefixes whose row-t argmax equals the
  // actual token t steps ahead.
  std::vector<double> alpha;
  std::vector<long> counts;
};

// Scores a drafter on held-out sequences, using every prefix of at least
// `min_prefix` tokens that has all draft_len continuation tokens.
AccuracyReport evaluate_accuracy(const DraftPredictor& drafter, const TargetModel& target,
                                 std::span<const TokenSequence> held_out, int draft_len,
                                 int min_prefix = 1);

void write_train_record(std::ostream& out, const TrainRecord& record);

}  // namespace pardraft

#endif  // PARDRAFT_TRAINING_H_
