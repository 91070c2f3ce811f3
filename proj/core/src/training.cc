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

#include "pardraft/training.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <utility>

namespace pardraft {

std::size_t BoolMatrix::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

namespace mask_predicates {

bool prompt_causal(int prompt_len, int valid_len, int q, int kv) {
  const bool in_prompt = q < prompt_len && kv < prompt_len;
  const bool valid = q < valid_len && kv < valid_len;
  return in_prompt && q >= kv && valid;
}

bool draft_view_prompt(int prompt_len, int block_len, int valid_len, int q, int kv) {
  if (q < prompt_len || kv >= prompt_len) return false;
  const int group = (q - prompt_len) / block_len;
  return group < valid_len && kv <= group;
}

bool draft_internal_causal(int prompt_len, int block_len, int valid_len, int q, int kv) {
  if (q < prompt_len || kv < prompt_len) return false;
  const int q_group = (q - prompt_len) / block_len;
  const int k_group = (kv - prompt_len) / block_len;
  return q_group == k_group && q >= kv && q_group < valid_len;
}

}  // namespace mask_predicates

namespace {

void check_mask_dims(int prompt_len, int block_len, int valid_len) {
  if (prompt_len < 1 || block_len < 1) {
    throw_error(ErrorCode::kInvalidConfig, "training mask needs P >= 1 and block length >= 1");
  }
  if (valid_len < 0 || valid_len > prompt_len) {
    throw_error(ErrorCode::kInvalidConfig, "valid_len must lie in [0, P]");
  }
}

}  // namespace

BoolMatrix build_training_mask(int prompt_len, int block_len, int valid_len) {
  check_mask_dims(prompt_len, block_len, valid_len);
  const int n = prompt_len * (block_len + 1);
  BoolMatrix mask(n, n);
  for (int q = 0; q < valid_len; ++q) {
    for (int kv = 0; kv <= q; ++kv) mask.set(q, kv, true);
  }
  for (int g = 0; g < valid_len; ++g) {
    const int start = prompt_len + g * block_len;
    for (int m = 0; m < block_len; ++m) {
      for (int kv = 0; kv <= g; ++kv) mask.set(start + m, kv, true);
      for (int kv = start; kv <= start + m; ++kv) mask.set(start + m, kv, true);
    }
  }
  return mask;
}

std::vector<int> build_position_ids(int prompt_len, int block_len) {
  check_mask_dims(prompt_len, block_len, prompt_len);
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(prompt_len) * (block_len + 1));
  for (int p = 0; p < prompt_len; ++p) ids.push_back(p);
  for (int g = 0; g < prompt_len; ++g) {
    for (int m = 0; m < block_len; ++m) ids.push_back(g + 1 + m);
  }
  return ids;
}

void AnnealedKLConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw_error(ErrorCode::kInvalidConfig, "gamma must lie in (0, 1]");
  }
  if (draft_len < 1) throw_error(ErrorCode::kInvalidConfig, "draft_len must be >= 1");
}

std::vector<double> AnnealedKLConfig::weights() const {
  std::vector<double> w(static_cast<std::size_t>(draft_len));
  double lambda = 1.0;
  for (auto& x : w) {
    x = lambda;
    lambda *= gamma;
  }
  return w;
}

KLResult annealed_kl(std::span<const std::vector<double>> draft,
                     std::span<const std::vector<double>> target,
                     const AnnealedKLConfig& cfg) {
  cfg.validate();
  if (draft.size() != static_cast<std::size_t>(cfg.draft_len) || target.size() != draft.size()) {
    throw_error(ErrorCode::kShapeMismatch, "annealed KL needs d draft and d target rows");
  }
  const auto w = cfg.weights();
  KLResult out;
  for (std::size_t t = 0; t < draft.size(); ++t) {
    if (draft[t].size() != target[t].size()) {
      throw_error(ErrorCode::kShapeMismatch, "draft and target rows differ in width");
    }
    double kl = 0.0;
    for (std::size_t v = 0; v < draft[t].size(); ++v) {
      const double q = target[t][v];
      if (q <= 0.0) continue;
      double p = draft[t][v];
      if (p <= 0.0) {
        p = kScoreEpsilon;
        out.floored = true;
      }
      kl += q * (std::log(q) - std::log(p));
    }
    out.loss += w[t] * kl;
  }
  return out;
}

namespace {

// lambda * KL(q || softmax(logits)); adds lambda * (p - q) into grad_row.
double weighted_kl_row(const double* logits, std::span<const double> q, double lambda,
                       double* grad_row) {
  const auto vocab = q.size();
  double max_logit = -INFINITY;
  for (std::size_t v = 0; v < vocab; ++v) max_logit = std::max(max_logit, logits[v]);
  double sum = 0.0;
  for (std::size_t v = 0; v < vocab; ++v) sum += std::exp(logits[v] - max_logit);
  const double log_z = max_logit + std::log(sum);
  double kl = 0.0;
  for (std::size_t v = 0; v < vocab; ++v) {
    const double log_p = logits[v] - log_z;
    if (q[v] > 0.0) kl += q[v] * (std::log(q[v]) - log_p);
    if (grad_row != nullptr) grad_row[v] += lambda * (std::exp(log_p) - q[v]);
  }
  return lambda * kl;
}

}  // namespace

double annealed_kl_from_logits(const RowMatrix& logits,
                               std::span<const std::vector<double>> target,
                               const AnnealedKLConfig& cfg, RowMatrix* grad) {
  cfg.validate();
  if (logits.rows() != cfg.draft_len || target.size() != static_cast<std::size_t>(cfg.draft_len)) {
    throw_error(ErrorCode::kShapeMismatch, "annealed KL needs d logit and target rows");
  }
  if (grad != nullptr) *grad = RowMatrix::Zero(logits.rows(), logits.cols());
  const auto w = cfg.weights();
  double loss = 0.0;
  for (int t = 0; t < cfg.draft_len; ++t) {
    if (target[t].size() != static_cast<std::size_t>(logits.cols())) {
      throw_error(ErrorCode::kShapeMismatch, "target row width differs from logits");
    }
    loss += weighted_kl_row(logits.row(t).data(), target[t], w[t],
                            grad != nullptr ? grad->row(t).data() : nullptr);
  }
  return loss;
}

TrainingLayout training_layout(int prompt_len, int draft_len, bool shifted) {
  if (draft_len < 1 || (shifted && draft_len < 2)) {
    throw_error(ErrorCode::kInvalidConfig,
                shifted ? "shifted training needs draft_len >= 2" : "draft_len must be >= 1");
  }
  const int block = shifted ? draft_len - 1 : draft_len;
  const BoolMatrix mask = build_training_mask(prompt_len, block, prompt_len);
  TrainingLayout out;
  auto& layout = out.layout;
  layout.position_ids = build_position_ids(prompt_len, block);
  const int n = mask.rows();
  layout.source.resize(n);
  layout.visible.resize(n);
  for (int s = 0; s < n; ++s) {
    layout.source[s] = s < prompt_len ? s : kMaskSlot;
    for (int kv = 0; kv < n; ++kv) {
      if (mask(s, kv)) layout.visible[s].push_back(kv);
    }
  }
  const int first_mask_position = shifted ? 2 : 1;
  for (int g = 0; g < prompt_len; ++g) {
    if (shifted) out.supervised.push_back({g, 1, g + 1});
    for (int m = 0; m < block; ++m) {
      const int t = first_mask_position + m;
      if (g + t > prompt_len) break;
      out.supervised.push_back({prompt_len + g * block + m, t, g + t});
    }
  }
  return out;
}

BatchResult batch_loss(const ToyDraft& model, const MarkovTarget& target,
                       std::span<const TokenSequence> batch, const AnnealedKLConfig& cfg,
                       ToyDraftParams* grad) {
  cfg.validate();
  const auto weights = cfg.weights();
  std::map<int, TrainingLayout> layouts;
  std::vector<long> hits(weights.size(), 0), totals(weights.size(), 0);
  long blocks = 0;
  for (const auto& seq : batch) blocks += static_cast<long>(seq.size());
  BatchResult out;
  if (blocks == 0) {
    out.accuracy.assign(weights.size(), 0.0);
    return out;
  }
  const double norm = 1.0 / static_cast<double>(blocks);

  ToyDraft::ForwardCache cache;
  for (const auto& seq : batch) {
    if (seq.empty()) continue;
    const int len = static_cast<int>(seq.size());
    auto it = layouts.find(len);
    if (it == layouts.end()) {
      it = layouts.emplace(len, training_layout(len, cfg.draft_len, model.config().shifted)).first;
    }
    const TrainingLayout& tl = it->second;
    const Eigen::MatrixXd feats = target.features(seq);
    const RowMatrix logits = model.forward(tl.layout, seq, feats, grad != nullptr ? &cache : nullptr);
    RowMatrix dlogits;
    if (grad != nullptr) dlogits = RowMatrix::Zero(logits.rows(), logits.cols());
    for (const auto& sup : tl.supervised) {
      const auto q = target.row(target.context_id(std::span(seq).first(sup.context_len)));
      const double lambda = weights[sup.position - 1] * norm;
      out.loss += weighted_kl_row(logits.row(sup.slot).data(), q, lambda,
                                  grad != nullptr ? dlogits.row(sup.slot).data() : nullptr);
      if (sup.context_len < len) {
        const auto& row = logits.row(sup.slot);
        Eigen::Index best = 0;
        row.maxCoeff(&best);
        hits[sup.position - 1] += best == seq[sup.context_len] ? 1 : 0;
        ++totals[sup.position - 1];
      }
    }
    if (grad != nullptr) model.backward(tl.layout, cache, feats, dlogits, *grad);
  }
  out.accuracy.resize(weights.size());
  for (std::size_t t = 0; t < weights.size(); ++t) {
    out.accuracy[t] = totals[t] > 0 ? static_cast<double>(hits[t]) / totals[t] : 0.0;
  }
  return out;
}

ToyDraft train_toy_draft(const MarkovTarget& target, std::span<const TokenSequence> corpus,
                         ToyDraft model, const TrainConfig& cfg,
                         const TrainCallback& on_record) {
  cfg.kl.validate();
  if (cfg.steps < 0 || !(cfg.learning_rate > 0.0) || cfg.log_every < 0) {
    throw_error(ErrorCode::kInvalidConfig, "training needs steps >= 0, lr > 0, log_every >= 0");
  }
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw_error(ErrorCode::kInvalidConfig, "Adam betas must lie in [0, 1)");
  }
  if (model.config().vocab_size != target.vocab_size() ||
      model.config().feature_dim != target.feature_dim()) {
    throw_error(ErrorCode::kShapeMismatch, "draft model does not match the target");
  }
  ToyDraftParams first = ToyDraftParams::zeros(model.config());
  ToyDraftParams second = ToyDraftParams::zeros(model.config());
  double initial = 0.0;
  for (int step = 0; step < cfg.steps; ++step) {
    ToyDraftParams grad = ToyDraftParams::zeros(model.config());
    const BatchResult br = batch_loss(model, target, corpus, cfg.kl, &grad);
    if (step == 0) initial = br.loss;
    if (!std::isfinite(br.loss) || br.loss > 10.0 * initial) {
      throw_error(ErrorCode::kDivergence,
                  "loss " + std::to_string(br.loss) + " at step " + std::to_string(step) +
                      " (initial " + std::to_string(initial) + ", lr " +
                      std::to_string(cfg.learning_rate) + ")");
    }
    const bool log = on_record && cfg.log_every > 0 &&
                     (step % cfg.log_every == 0 || step + 1 == cfg.steps);
    if (log) on_record({step, br.loss, br.accuracy}, model);
    auto params = model.params().tensors();
    const auto grads = std::as_const(grad).tensors();
    if (cfg.optimizer == Optimizer::kGradientDescent) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        for (std::size_t j = 0; j < params[i].size(); ++j) {
          params[i][j] -= cfg.learning_rate * grads[i][j];
        }
      }
      continue;
    }
    auto m1 = first.tensors();
    auto m2 = second.tensors();
    const double c1 = 1.0 - std::pow(cfg.beta1, step + 1);
    const double c2 = 1.0 - std::pow(cfg.beta2, step + 1);
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = 0; j < params[i].size(); ++j) {
        const double g = grads[i][j];
        m1[i][j] = cfg.beta1 * m1[i][j] + (1.0 - cfg.beta1) * g;
        m2[i][j] = cfg.beta2 * m2[i][j] + (1.0 - cfg.beta2) * g * g;
        params[i][j] -= cfg.learning_rate * (m1[i][j] / c1) / (std::sqrt(m2[i][j] / c2) + 1e-8);
      }
    }
  }
  return model;
}

ToyDraft train_toy_draft(const MarkovTarget& target, std::span<const TokenSequence> corpus,
                         const ToyDraftConfig& draft_cfg, const TrainConfig& cfg,
                         const TrainCallback& on_record) {
  return train_toy_draft(target, corpus, ToyDraft(draft_cfg, target.embedding(), cfg.seed), cfg,
                         on_record);
}

double finite_diff_check(const ToyDraft& model, const MarkovTarget& target,
                         std::span<const TokenSequence> batch, const AnnealedKLConfig& cfg,
                         double h, int samples, std::uint64_t seed) {
  if (!(h > 0.0) || samples < 1) {
    throw_error(ErrorCode::kInvalidConfig, "finite difference needs h > 0 and samples >= 1");
  }
  ToyDraftParams grad = ToyDraftParams::zeros(model.config());
  batch_loss(model, target, batch, cfg, &grad);
  const auto grads = std::as_const(grad).tensors();
  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (std::size_t j = 0; j < grads[i].size(); ++j) index.emplace_back(i, j);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(index.begin(), index.end(), rng);
  index.resize(std::min(index.size(), static_cast<std::size_t>(samples)));

  ToyDraft probe = model;
  double worst = 0.0;
  for (const auto& [i, j] : index) {
    double& w = probe.params().tensors()[i][j];
    const double saved = w;
    w = saved + h;
    const double up = batch_loss(probe, target, batch, cfg, nullptr).loss;
    w = saved - h;
    const double down = batch_loss(probe, target, batch, cfg, nullptr).loss;
    w = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = grads[i][j];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

AccuracyReport evaluate_accuracy(const DraftPredictor& drafter, const TargetModel& target,
                                 std::span<const TokenSequence> held_out, int draft_len,
                                 int min_prefix) {
  if (draft_len < 1 || min_prefix < 1) {
    throw_error(ErrorCode::kInvalidConfig, "evaluation needs draft_len >= 1 and min_prefix >= 1");
  }
  AccuracyReport report;
  report.alpha.assign(static_cast<std::size_t>(draft_len), 0.0);
  report.counts.assign(static_cast<std::size_t>(draft_len), 0);
  std::vector<long> hits(static_cast<std::size_t>(draft_len), 0);
  for (const auto& seq : held_out) {
    const int len = static_cast<int>(seq.size());
    for (int n = min_prefix; n + draft_len <= len; ++n) {
      const ParallelLogits logits = drafter.predict(std::span(seq).first(n), target, draft_len);
      for (int t = 0; t < draft_len; ++t) {
        hits[t] += argmax(logits.row(t)) == seq[n + t] ? 1 : 0;
        ++report.counts[t];
      }
    }
  }
  for (int t = 0; t < draft_len; ++t) {
    if (report.counts[t] > 0) report.alpha[t] = static_cast<double>(hits[t]) / report.counts[t];
  }
  return report;
}

void write_train_record(std::ostream& out, const TrainRecord& record) {
  out << "{\"step\":" << record.step << ",\"loss\":" << record.loss << ",\"accuracy\":[";
  for (std::size_t t = 0; t < record.accuracy.size(); ++t) {
    out << (t > 0 ? "," : "") << record.accuracy[t];
  }
  out << "]}\n";
}

}  // namespace pardraft
