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

#include "pardraft/target_model.h"

#include <algorithm>
#include <cmath>

namespace pardraft {

std::vector<double> TargetModel::next_dist(std::span<const TokenId> prefix,
                                           double temperature) const {
  const auto q = distribution(prefix);
  return apply_temperature(q, temperature);
}

TokenId TargetModel::greedy_token(std::span<const TokenId> prefix) const {
  return argmax(distribution(prefix));
}

TokenId argmax(std::span<const double> values) {
  return static_cast<TokenId>(std::max_element(values.begin(), values.end()) -
                              values.begin());
}

std::vector<double> apply_temperature(std::span<const double> probs,
                                      double temperature) {
  if (temperature < 0.0 || !std::isfinite(temperature)) {
    throw_error(ErrorCode::kInvalidConfig, "temperature must be >= 0");
  }
  std::vector<double> out(probs.size(), 0.0);
  if (temperature == 0.0) {
    out[argmax(probs)] = 1.0;
    return out;
  }
  if (temperature == 1.0) {
    out.assign(probs.begin(), probs.end());
    return out;
  }
  // Work in log space so small temperatures do not underflow everything.
  double max_log = -INFINITY;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) max_log = std::max(max_log, std::log(probs[i]) / temperature);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) {
      out[i] = std::exp(std::log(probs[i]) / temperature - max_log);
      sum += out[i];
    }
  }
  for (double& v : out) v /= sum;
  return out;
}

TokenId sample_index(std::span<const double> probs, std::mt19937_64& rng) {
  double total = 0.0;
  for (const double p : probs) total += p;
  std::uniform_real_distribution<double> unif(0.0, total);
  const double u = unif(rng);
  double acc = 0.0;
  TokenId last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<TokenId>(i);
    if (u < acc) return last_positive;
  }
  return last_positive;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  const double m = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace pardraft
