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

#include "pardraft/spec_engine.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "pardraft/ngram_trie.h"

namespace pardraft {

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point start) {
  return std::chrono::duration<double, std::micro>(Clock::now() - start).count();
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace

VerifyResult verify(const DraftTree& tree, const LinearizedTree& lin,
                    std::span<const TokenId> prefix, const TargetModel& target,
                    double temperature, std::mt19937_64& rng) {
  const std::size_t n = lin.size();
  VerifyResult result;

  // One target evaluation per tree position plus the root; a real target
  // would do this in a single tree-attention pass.
  std::vector<std::vector<double>> dists(n + 1);
  const auto root_start = Clock::now();
  dists[0] = target.next_dist(prefix, temperature);
  result.root_call_us = micros_since(root_start);
  for (std::size_t q = 0; q < n; ++q) {
    dists[q + 1] = target.next_dist(lin.context_for(prefix, q), temperature);
  }
  result.target_calls = static_cast<int>(n + 1);

  // children[p + 1] lists the linear positions whose parent is p.
  std::vector<std::vector<int>> children(n + 1);
  for (std::size_t q = 0; q < n; ++q) children[lin.parent[q] + 1].push_back(static_cast<int>(q));

  int cur = kRootParent;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (true) {
    const std::vector<double>& p = dists[cur + 1];
    const auto& kids = children[cur + 1];
    int next = kRootParent;

    if (temperature == 0.0) {
      const TokenId best = argmax(p);
      for (const int c : kids) {
        if (lin.tokens[c] == best) {
          next = c;
          break;
        }
      }
      if (next == kRootParent) {
        result.bonus = best;
        break;
      }
    } else {
      std::vector<int> remaining;
      std::vector<double> draft;
      for (const int c : kids) {
        const double w = tree.nodes[lin.node_index[c]].draft_prob;
        if (w > 0.0) {
          remaining.push_back(c);
          draft.push_back(w);
        }
      }
      std::vector<double> residual = p;
      while (!remaining.empty()) {
        double draft_sum = 0.0;
        for (const double w : draft) draft_sum += w;
        for (double& w : draft) w /= draft_sum;

        const auto pick = static_cast<std::size_t>(sample_index(draft, rng));
        const int c = remaining[pick];
        const TokenId t = lin.tokens[c];
        if (unif(rng) * draft[pick] < residual[t]) {
          next = c;
          break;
        }
        std::vector<double> updated = residual;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
          const TokenId ti = lin.tokens[remaining[i]];
          updated[ti] = std::max(0.0, updated[ti] - draft[i]);
        }
        double mass = 0.0;
        for (const double v : updated) mass += v;
        // Zero residual mass means rejection had probability zero; keep the
        // previous residual rather than divide by round-off.
        if (mass > 1e-300) {
          for (double& v : updated) v /= mass;
          residual = std::move(updated);
        }
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
        draft.erase(draft.begin() + static_cast<std::ptrdiff_t>(pick));
      }
      if (next == kRootParent) {
        result.bonus = sample_index(residual, rng);
        break;
      }
    }
    result.accepted.push_back(lin.tokens[next]);
    result.accepted_positions.push_back(next);
    cur = next;
  }
  return result;
}

void DecodeConfig::validate() const {
  if (draft_len < 1) throw_error(ErrorCode::kInvalidConfig, "draft_len must be >= 1");
  if (max_tokens < 1) throw_error(ErrorCode::kInvalidConfig, "max_tokens must be >= 1");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw_error(ErrorCode::kInvalidConfig, "temperature must be 0 or positive");
  }
  if (prune_workers < 1) throw_error(ErrorCode::kInvalidConfig, "prune_workers must be >= 1");
  prune.validate();
}

DecodeResult decode(std::span<const TokenId> prompt, const TargetModel& target,
                    const DraftPredictor& drafter, const NgramTrie* trie,
                    const DecodeConfig& cfg) {
  cfg.validate();
  if (prompt.empty()) throw_error(ErrorCode::kInvalidConfig, "decode needs a nonempty prompt");

  DecodeResult result;
  DecodeMetrics& m = result.metrics;
  TokenSequence committed(prompt.begin(), prompt.end());
  std::mt19937_64 rng(cfg.seed);
  bool finished = false;

  while (!finished && static_cast<int>(result.tokens.size()) < cfg.max_tokens) {
    CycleRecord rec;
    auto t0 = Clock::now();
    const ParallelLogits logits = drafter.predict(committed, target, cfg.draft_len);
    rec.draft_us = micros_since(t0);
    if (logits.vocab_size() != target.vocab_size() || logits.draft_len() != cfg.draft_len) {
      throw_error(ErrorCode::kShapeMismatch, "drafter output does not match d x V");
    }

    t0 = Clock::now();
    const DraftTree tree = prune(logits, trie, cfg.prune, committed, cfg.prune_workers);
    rec.prune_us = micros_since(t0);
    rec.tree_size = static_cast<int>(tree.size());

    t0 = Clock::now();
    const LinearizedTree lin = linearize(tree, static_cast<int>(committed.size()));
    const VerifyResult vr = verify(tree, lin, committed, target, cfg.temperature, rng);
    rec.verify_us = micros_since(t0);
    rec.base_us = vr.root_call_us;
    rec.accepted = static_cast<int>(vr.accepted.size());

    TokenSequence step = vr.accepted;
    step.push_back(vr.bonus);
    for (const TokenId t : step) {
      if (static_cast<int>(result.tokens.size()) == cfg.max_tokens) break;
      result.tokens.push_back(t);
      committed.push_back(t);
      ++rec.emitted;
      if (cfg.eos_token >= 0 && t == cfg.eos_token) {
        finished = true;
        break;
      }
    }
    rec.accepted = std::min(rec.accepted, rec.emitted);
    m.records.push_back(rec);
  }

  m.cycles = static_cast<int>(m.records.size());
  m.tokens_out = static_cast<int>(result.tokens.size());
  m.tau = m.cycles > 0 ? static_cast<double>(m.tokens_out) / m.cycles : 0.0;

  std::vector<double> draft, prune_t, verify_t, base;
  const std::size_t skip = m.records.size() >= 2 ? 1 : 0;
  for (std::size_t i = skip; i < m.records.size(); ++i) {
    draft.push_back(m.records[i].draft_us);
    prune_t.push_back(m.records[i].prune_us);
    verify_t.push_back(m.records[i].verify_us);
    base.push_back(m.records[i].base_us);
  }
  m.median_draft_us = median_of(draft);
  m.median_prune_us = median_of(prune_t);
  m.median_verify_us = median_of(verify_t);
  m.median_base_us = median_of(base);
  if (m.tau >= 1.0 && m.median_verify_us > 0.0 && m.median_base_us > 0.0) {
    const auto est = estimate_speedup(m.tau, m.median_verify_us, m.median_draft_us,
                                      m.median_prune_us, m.median_base_us);
    m.modeled_speedup = est.speedup;
    m.draft_ratio = est.draft_ratio;
  }
  return result;
}

TokenSequence autoregressive_decode(std::span<const TokenId> prompt,
                                    const TargetModel& target,
                                    const DecodeConfig& cfg) {
  cfg.validate();
  TokenSequence committed(prompt.begin(), prompt.end());
  TokenSequence out;
  std::mt19937_64 rng(cfg.seed);
  while (static_cast<int>(out.size()) < cfg.max_tokens) {
    const auto q = target.next_dist(committed, cfg.temperature);
    const TokenId t = cfg.temperature == 0.0 ? argmax(q) : sample_index(q, rng);
    out.push_back(t);
    committed.push_back(t);
    if (cfg.eos_token >= 0 && t == cfg.eos_token) break;
  }
  return out;
}

ExactnessReport exactness_check(std::span<const TokenId> prompt,
                                const TargetModel& target,
                                const DraftPredictor& drafter,
                                const NgramTrie* trie, const DecodeConfig& cfg,
                                int n_samples) {
  cfg.validate();
  if (cfg.temperature <= 0.0) {
    throw_error(ErrorCode::kInvalidConfig, "exactness check needs temperature > 0");
  }
  ExactnessReport report;
  if (n_samples <= 0) return report;

  const int vocab = target.vocab_size();
  const int horizon = cfg.max_tokens;
  const double outcomes = std::pow(static_cast<double>(vocab), horizon);
  if (outcomes > static_cast<double>(1 << 20)) {
    throw_error(ErrorCode::kInvalidConfig, "output space too large to enumerate");
  }
  const auto n_outcomes = static_cast<std::size_t>(outcomes);

  // Exact ancestral probabilities, indexed by the base-V sequence value.
  std::vector<double> exact(n_outcomes, 0.0);
  TokenSequence ctx(prompt.begin(), prompt.end());
  auto enumerate = [&](auto&& self, int depth, std::size_t code, double prob) -> void {
    if (depth == horizon) {
      exact[code] = prob;
      return;
    }
    const auto q = target.next_dist(ctx, cfg.temperature);
    for (int v = 0; v < vocab; ++v) {
      if (q[v] == 0.0) continue;
      ctx.push_back(v);
      self(self, depth + 1, code * vocab + v, prob * q[v]);
      ctx.pop_back();
    }
  };
  enumerate(enumerate, 0, 0, 1.0);

  DecodeConfig run = cfg;
  run.eos_token = -1;
  std::vector<double> counts(n_outcomes, 0.0);
  for (int i = 0; i < n_samples; ++i) {
    run.seed = cfg.seed + static_cast<std::uint64_t>(i);
    const auto out = decode(prompt, target, drafter, trie, run).tokens;
    std::size_t code = 0;
    for (const TokenId t : out) code = code * vocab + t;
    counts[code] += 1.0;
  }
  double tv = 0.0;
  for (std::size_t c = 0; c < n_outcomes; ++c) {
    tv += std::abs(counts[c] / n_samples - exact[c]);
  }
  report.tv = 0.5 * tv;
  report.defined = true;
  report.samples = n_samples;
  report.outcomes = n_outcomes;
  return report;
}

SpeedupEstimate estimate_speedup(double tau, double t_verify, double t_draft,
                                 double t_prune, double t_base) {
  if (!(tau >= 1.0) || !(t_verify > 0.0) || !(t_base > 0.0) || !(t_draft >= 0.0) ||
      !(t_prune >= 0.0) || !std::isfinite(tau) || !std::isfinite(t_verify) ||
      !std::isfinite(t_base) || std::isnan(t_draft) || std::isnan(t_prune)) {
    throw_error(ErrorCode::kInvalidConfig,
                "speedup estimate needs tau >= 1, t_verify > 0, t_base > 0 and "
                "nonnegative drafting times");
  }
  const double cycle = t_verify + t_draft + t_prune;
  SpeedupEstimate est;
  if (std::isinf(cycle)) {
    est.speedup = 0.0;
    est.draft_ratio = 1.0;
    return est;
  }
  est.speedup = tau * t_base / cycle;
  est.draft_ratio = (t_draft + t_prune) / cycle;
  return est;
}

void write_metrics_report(std::ostream& out, const DecodeMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "cycles            %d\n"
                "tokens_out        %d\n"
                "tau               %.4f\n"
                "draft_forward_us  %.2f (median)\n"
                "prune_us          %.2f (median)\n"
                "verify_us         %.2f (median)\n"
                "base_step_us      %.2f (median)\n"
                "draft_ratio       %.4f\n"
                "modeled_speedup   %.4f\n",
                m.cycles, m.tokens_out, m.tau, m.median_draft_us, m.median_prune_us,
                m.median_verify_us, m.median_base_us, m.draft_ratio, m.modeled_speedup);
  out << buf;
}

void write_cycle_records(std::ostream& out, const DecodeMetrics& m) {
  char buf[256];
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const CycleRecord& r = m.records[i];
    std::snprintf(buf, sizeof(buf),
                  "{\"cycle\":%zu,\"accepted\":%d,\"emitted\":%d,\"tree_size\":%d,"
                  "\"draft_us\":%.3f,\"prune_us\":%.3f,\"verify_us\":%.3f}\n",
                  i, r.accepted, r.emitted, r.tree_size, r.draft_us, r.prune_us,
                  r.verify_us);
    out << buf;
  }
}

}  // namespace pardraft
