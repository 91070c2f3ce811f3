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

#ifndef PARDRAFT_TARGET_MODEL_H_
#define PARDRAFT_TARGET_MODEL_H_

#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pardraft/common.h"
#include "pardraft/draft_tree.h"

namespace pardraft {

// The autoregressive model whose output distribution decoding must preserve.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual int vocab_size() const = 0;
  // Untempered next-token distribution q(. | prefix); sums to 1.
  virtual std::vector<double> distribution(
      std::span<const TokenId> prefix) const = 0;

  // Width of one feature row (the concatenated hidden-state stand-ins).
  virtual int feature_dim() const = 0;
  // One row per position; row j describes the model state that emitted
  // tokens[j], i.e. it depends only on tokens[0..j).
  virtual Eigen::MatrixXd features(std::span<const TokenId> tokens) const = 0;

  // Temperature-adjusted distribution; temperature 0 gives a one-hot argmax.
  std::vector<double> next_dist(std::span<const TokenId> prefix,
                                double temperature) const;
  TokenId greedy_token(std::span<const TokenId> prefix) const;
};

// Produces all d rows of draft logits in a single call per decode cycle.
class DraftPredictor {
 public:
  virtual ~DraftPredictor() = default;

  virtual ParallelLogits predict(std::span<const TokenId> prefix,
                                 const TargetModel& target,
                                 int draft_len) const = 0;
};

// p^(1/T) renormalized; T == 0 gives one-hot on the argmax.
std::vector<double> apply_temperature(std::span<const double> probs,
                                      double temperature);
// First index of the maximum.
TokenId argmax(std::span<const double> values);
// Inverse-CDF draw; falls back to the last positive entry on round-off.
TokenId sample_index(std::span<const double> probs, std::mt19937_64& rng);
std::vector<double> softmax(std::span<const double> logits);

}  // namespace pardraft

#endif  // PARDRAFT_TARGET_MODEL_H_
