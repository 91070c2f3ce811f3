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

#include "commands.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include <CLI/CLI.hpp>
#include <nlohmann/json.hpp>

#include "pardraft/corpus.h"
#include "pardraft/ngram_trie.h"
#include "pardraft/spec_engine.h"
#include "pardraft/toy_models.h"
#include "pardraft/training.h"
#include "run_config.h"

namespace pardraft::tools {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kOutOfVocabulary:
    case ErrorCode::kShapeMismatch:
      return kExitConfig;
    case ErrorCode::kIo:
    case ErrorCode::kBadMagic:
    case ErrorCode::kTruncatedFile:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kCorruptFile:
      return kExitIo;
    case ErrorCode::kDivergence:
      return kExitDivergence;
    case ErrorCode::kInvalidTree:
      return kExitFailure;
  }
  return kExitFailure;
}

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Streams {
  std::ostream& out;
  std::ostream& err;
  bool as_json = false;

  void emit(const json& record) const { out << record.dump() << '\n'; }
  void warn(const std::string& what) const { err << "warning: " << what << '\n'; }
};

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? default_run_config() : load_run_config(path);
}

std::string join(std::span<const TokenId> tokens) {
  std::ostringstream out;
  for (std::size_t i = 0; i < tokens.size(); ++i) out << (i > 0 ? " " : "") << tokens[i];
  return out.str();
}

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

std::optional<NgramTrie> load_trie(const RunConfig& cfg, const Streams& io, bool disabled) {
  if (disabled) return std::nullopt;
  if (!cfg.paths.trie) {
    io.warn("no trie configured; continuations score at the epsilon floor");
    return std::nullopt;
  }
  NgramTrie trie = NgramTrie::load(*cfg.paths.trie);
  if (trie.vocab_size() != cfg.target.vocab_size) {
    throw_error(ErrorCode::kInvalidConfig,
                "trie vocab " + std::to_string(trie.vocab_size()) + " differs from target vocab " +
                    std::to_string(cfg.target.vocab_size));
  }
  return trie;
}

struct DrafterChoice {
  std::unique_ptr<DraftPredictor> drafter;
  std::string name;
};

DrafterChoice make_drafter(std::string kind, const RunConfig& cfg, const MarkovTarget& target) {
  if (kind == "auto") kind = cfg.paths.model ? "toy" : "oracle";
  DrafterChoice c;
  c.name = kind;
  if (kind == "toy") {
    if (!cfg.paths.model) throw_error(ErrorCode::kInvalidConfig, "drafter 'toy' needs paths.model");
    c.drafter = std::make_unique<ToyDraft>(ToyDraft::load(*cfg.paths.model));
  } else if (kind == "oracle") {
    c.drafter = std::make_unique<OracleDrafter>();
  } else if (kind == "adversarial") {
    c.drafter = std::make_unique<AdversarialDrafter>();
  } else if (kind == "uniform") {
    c.drafter = std::make_unique<UniformDrafter>(cfg.seed);
  } else if (kind == "marginal") {
    c.drafter = std::make_unique<MarginalDrafter>(target);
  } else {
    throw_error(ErrorCode::kInvalidConfig, "unknown drafter '" + kind + "'");
  }
  return c;
}

const std::vector<std::string> kDrafterKinds = {"auto", "toy", "oracle", "adversarial", "uniform",
                                                "marginal"};

std::vector<TokenSequence> training_corpus(const RunConfig& cfg, const MarkovTarget& target) {
  if (cfg.paths.corpus) return load_corpus(*cfg.paths.corpus, CorpusFormat::kTokenIds);
  const auto& d = cfg.train.data;
  return target.sample_corpus(d.num_sequences, d.sequence_length, d.seed, d.temperature);
}

std::vector<TokenSequence> held_out_corpus(const RunConfig& cfg, const MarkovTarget& target) {
  const auto& d = cfg.eval.data;
  return target.sample_corpus(d.num_sequences, d.sequence_length, d.seed, d.temperature);
}

json metrics_json(const DecodeMetrics& m) {
  return {{"type", "metrics"},
          {"cycles", m.cycles},
          {"tokens_out", m.tokens_out},
          {"tau", m.tau},
          {"median_draft_us", m.median_draft_us},
          {"median_prune_us", m.median_prune_us},
          {"median_verify_us", m.median_verify_us},
          {"median_base_us", m.median_base_us},
          {"draft_ratio", m.draft_ratio},
          {"modeled_speedup", m.modeled_speedup}};
}

// ---------------------------------------------------------------------------
// build-trie

struct BuildTrieArgs {
  std::string corpus;
  std::string config;
  std::string format = "ids";
  std::string out;
  int order = 3;
  int vocab = 0;
};

int cmd_build_trie(const BuildTrieArgs& a, const Streams& io) {
  if (a.order < 2) throw_error(ErrorCode::kInvalidConfig, "order must be >= 2");
  std::vector<TokenSequence> corpus;
  int vocab = a.vocab;
  if (!a.corpus.empty()) {
    const CorpusFormat format = a.format == "text" ? CorpusFormat::kText : CorpusFormat::kTokenIds;
    corpus = load_corpus(a.corpus, format);
    if (vocab == 0 && format == CorpusFormat::kText) vocab = ByteTokenizer::kVocabSize;
    if (vocab == 0 && !a.config.empty()) vocab = load_run_config(a.config).target.vocab_size;
    if (vocab == 0) {
      TokenId max_token = -1;
      for (const auto& seq : corpus) {
        for (const TokenId t : seq) max_token = std::max(max_token, t);
      }
      vocab = std::max(max_token + 1, 1);
    }
  } else if (!a.config.empty()) {
    const RunConfig cfg = load_run_config(a.config);
    const MarkovTarget target(cfg.target);
    corpus = training_corpus(cfg, target);
    if (vocab == 0) vocab = cfg.target.vocab_size;
  } else {
    throw_error(ErrorCode::kInvalidConfig, "build-trie needs --corpus or --config");
  }
  std::size_t tokens = 0;
  for (const auto& seq : corpus) tokens += seq.size();
  if (tokens == 0) io.warn("corpus is empty; writing a root-only trie");

  const auto start = Clock::now();
  const NgramTrie trie = NgramTrie::build(corpus, a.order, vocab);
  const double build_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  trie.save(a.out);
  const TrieStats stats = trie.stats();
  if (io.as_json) {
    io.emit({{"type", "trie_stats"},
             {"order", a.order},
             {"vocab_size", vocab},
             {"sequences", corpus.size()},
             {"tokens", tokens},
             {"node_count", stats.node_count},
             {"distinct_contexts", stats.distinct_contexts},
             {"bytes_on_disk", stats.bytes_on_disk},
             {"build_ms", build_ms},
             {"path", a.out}});
  } else {
    io.out << "order              " << a.order << "\n"
           << "vocab_size         " << vocab << "\n"
           << "sequences          " << corpus.size() << "\n"
           << "tokens             " << tokens << "\n"
           << "node_count         " << stats.node_count << "\n"
           << "distinct_contexts  " << stats.distinct_contexts << "\n"
           << "bytes_on_disk      " << stats.bytes_on_disk << "\n"
           << "wrote              " << a.out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// decode

struct DecodeArgs {
  std::string config;
  std::string prompt;
  std::string drafter = "auto";
  std::string records;
  bool no_ngram = false;
  bool baseline = false;
  std::optional<int> max_tokens;
  std::optional<double> temperature;
  std::optional<std::uint64_t> seed;
};

int cmd_decode(const DecodeArgs& a, const Streams& io) {
  RunConfig cfg = config_or_default(a.config);
  if (a.max_tokens) cfg.decode.max_tokens = *a.max_tokens;
  if (a.temperature) cfg.decode.temperature = *a.temperature;
  if (a.seed) cfg.decode.seed = cfg.seed = *a.seed;
  cfg.decode.validate();
  require_existing(cfg, {PathRole::kTrie, PathRole::kModel});
  const MarkovTarget target(cfg.target);
  const TokenSequence prompt = a.prompt.empty() ? TokenSequence{0} : parse_token_list(a.prompt);
  if (prompt.empty()) throw_error(ErrorCode::kInvalidConfig, "prompt must not be empty");
  target.context_id(prompt);  // rejects out-of-vocabulary prompt tokens

  if (a.baseline) {
    const auto start = Clock::now();
    const TokenSequence tokens = autoregressive_decode(prompt, target, cfg.decode);
    const double us = std::chrono::duration<double, std::micro>(Clock::now() - start).count();
    if (io.as_json) {
      io.emit({{"type", "transcript"}, {"mode", "baseline"}, {"prompt", prompt}, {"tokens", tokens}});
      io.emit({{"type", "baseline"}, {"tokens_out", tokens.size()}, {"total_us", us}});
    } else {
      io.out << "prompt: " << join(prompt) << "\n"
             << "tokens: " << join(tokens) << "\n"
             << "tokens_out        " << tokens.size() << "\n"
             << "total_us          " << format_double("%.2f", us) << "\n";
    }
    return kExitOk;
  }

  const std::optional<NgramTrie> trie = load_trie(cfg, io, a.no_ngram);
  const DrafterChoice drafter = make_drafter(a.drafter, cfg, target);
  const DecodeResult result =
      decode(prompt, target, *drafter.drafter, trie ? &*trie : nullptr, cfg.decode);
  if (!a.records.empty()) {
    std::ofstream rec(a.records);
    if (!rec) throw_error(ErrorCode::kIo, "cannot open " + a.records);
    write_cycle_records(rec, result.metrics);
  }
  if (io.as_json) {
    io.emit({{"type", "transcript"},
             {"mode", "speculative"},
             {"drafter", drafter.name},
             {"ngram", trie.has_value()},
             {"prompt", prompt},
             {"tokens", result.tokens}});
    io.emit(metrics_json(result.metrics));
  } else {
    io.out << "drafter: " << drafter.name << (trie ? " + n-gram" : " (no n-gram)") << "\n"
           << "prompt: " << join(prompt) << "\n"
           << "tokens: " << join(result.tokens) << "\n";
    write_metrics_report(io.out, result.metrics);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench-trie

struct BenchArgs {
  std::string trie;
  long queries = 100000;
  long warmup = 1000;
  int threads = 1;
  double interval_ms = 200.0;
  std::uint64_t seed = 0;
};

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::min<double>(
      static_cast<double>(v.size() - 1), std::floor(p * static_cast<double>(v.size() - 1) + 0.5)));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

int cmd_bench_trie(const BenchArgs& a, const Streams& io) {
  if (a.queries < 0 || a.warmup < 0 || a.threads < 1 || !(a.interval_ms > 0.0)) {
    throw_error(ErrorCode::kInvalidConfig,
                "bench-trie needs queries >= 0, warmup >= 0, threads >= 1, interval > 0");
  }
  const NgramTrie trie = NgramTrie::load(a.trie);
  std::vector<TokenSequence> contexts;
  trie.for_each_path(trie.order() - 1, [&](std::span<const TokenId> path) {
    contexts.emplace_back(path.begin(), path.end());
  });
  std::mt19937_64 rng(a.seed);
  if (contexts.empty()) {
    std::uniform_int_distribution<TokenId> tok(0, trie.vocab_size() - 1);
    for (int i = 0; i < 64; ++i) {
      TokenSequence ctx(static_cast<std::size_t>(trie.order() - 1));
      for (auto& t : ctx) t = tok(rng);
      contexts.push_back(std::move(ctx));
    }
  }
  const auto total = static_cast<std::size_t>(a.queries);
  std::vector<std::uint32_t> picks(total);
  std::uniform_int_distribution<std::size_t> pick(0, contexts.size() - 1);
  for (auto& p : picks) p = static_cast<std::uint32_t>(pick(rng));

  for (long i = 0; i < a.warmup; ++i) {
    (void)trie.children_scores(contexts[pick(rng)]);
  }

  std::vector<double> latency_us(total);
  std::vector<double> finish_ms(total);
  std::vector<std::uint64_t> digest(total);
  const auto start = Clock::now();
  auto worker = [&](int w) {
    for (std::size_t i = static_cast<std::size_t>(w); i < total;
         i += static_cast<std::size_t>(a.threads)) {
      const auto t0 = Clock::now();
      const auto scored = trie.children_scores(contexts[picks[i]]);
      const auto t1 = Clock::now();
      latency_us[i] = std::chrono::duration<double, std::micro>(t1 - t0).count();
      finish_ms[i] = std::chrono::duration<double, std::milli>(t1 - start).count();
      std::uint64_t h = scored.size();
      for (const auto& s : scored) {
        h = h * 1000003u + static_cast<std::uint64_t>(s.token) +
            static_cast<std::uint64_t>(std::llround(s.score * 1e9));
      }
      digest[i] = h;
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < a.threads; ++w) pool.emplace_back(worker, w);
    worker(0);
  }
  const double wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();

  std::uint64_t checksum = 0;
  for (std::size_t i = 0; i < total; ++i) checksum = checksum * 31u + digest[i];

  std::vector<std::pair<double, long>> intervals;
  for (std::size_t i = 0; i < total; ++i) {
    const auto bucket = static_cast<std::size_t>(finish_ms[i] / a.interval_ms);
    if (intervals.size() <= bucket) intervals.resize(bucket + 1, {0.0, 0});
    intervals[bucket].first += latency_us[i];
    ++intervals[bucket].second;
  }
  // Power-of-two histogram over nanoseconds.
  std::vector<long> histogram;
  for (const double us : latency_us) {
    const double ns = std::max(us * 1000.0, 1.0);
    const auto b = static_cast<std::size_t>(std::log2(ns));
    if (histogram.size() <= b) histogram.resize(b + 1, 0);
    ++histogram[b];
  }
  double mean = 0.0;
  for (const double us : latency_us) mean += us;
  if (total > 0) mean /= static_cast<double>(total);
  const double median = percentile(latency_us, 0.5);
  const double p90 = percentile(latency_us, 0.9);
  const double p99 = percentile(latency_us, 0.99);
  const double qps = wall_ms > 0.0 ? static_cast<double>(total) / (wall_ms / 1000.0) : 0.0;

  if (io.as_json) {
    for (std::size_t b = 0; b < intervals.size(); ++b) {
      if (intervals[b].second == 0) continue;
      io.emit({{"type", "interval"},
               {"start_ms", static_cast<double>(b) * a.interval_ms},
               {"queries", intervals[b].second},
               {"mean_us", intervals[b].first / static_cast<double>(intervals[b].second)}});
    }
    json hist = json::array();
    for (std::size_t b = 0; b < histogram.size(); ++b) {
      if (histogram[b] > 0) hist.push_back({{"ge_ns", 1ull << b}, {"count", histogram[b]}});
    }
    io.emit({{"type", "bench_trie"},
             {"node_count", trie.node_count()},
             {"contexts", contexts.size()},
             {"queries", total},
             {"threads", a.threads},
             {"median_us", median},
             {"p90_us", p90},
             {"p99_us", p99},
             {"mean_us", mean},
             {"queries_per_s", qps},
             {"checksum", checksum},
             {"histogram", hist}});
  } else {
    io.out << "node_count     " << trie.node_count() << "\n"
           << "contexts       " << contexts.size() << "\n"
           << "queries        " << total << " on " << a.threads << " thread(s)\n"
           << "median_us      " << format_double("%.3f", median) << "\n"
           << "p90_us         " << format_double("%.3f", p90) << "\n"
           << "p99_us         " << format_double("%.3f", p99) << "\n"
           << "mean_us        " << format_double("%.3f", mean) << "\n"
           << "queries_per_s  " << format_double("%.0f", qps) << "\n"
           << "checksum       " << checksum << "\n";
    io.out << "interval averages (" << a.interval_ms << " ms):\n";
    for (std::size_t b = 0; b < intervals.size(); ++b) {
      if (intervals[b].second == 0) continue;
      io.out << "  " << format_double("%8.0f", static_cast<double>(b) * a.interval_ms) << " ms  "
             << format_double("%.3f", intervals[b].first / static_cast<double>(intervals[b].second))
             << " us  (" << intervals[b].second << ")\n";
    }
    io.out << "histogram:\n";
    for (std::size_t b = 0; b < histogram.size(); ++b) {
      if (histogram[b] == 0) continue;
      io.out << "  >= " << format_double("%9.0f", std::ldexp(1.0, static_cast<int>(b)))
             << " ns  " << histogram[b] << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train-toy

struct TrainArgs {
  std::string config;
  std::string out;
  std::string log;
  std::optional<int> steps;
  std::optional<double> gamma;
  std::optional<double> learning_rate;
  std::optional<bool> shifted;
};

void apply_train_overrides(RunConfig& cfg, const TrainArgs& a) {
  auto& tc = cfg.train.train;
  if (a.steps) tc.steps = *a.steps;
  if (a.gamma) tc.kl.gamma = *a.gamma;
  if (a.learning_rate) tc.learning_rate = *a.learning_rate;
  if (a.shifted) cfg.train.draft.shifted = *a.shifted;
  cfg.validate();
}

int cmd_train_toy(const TrainArgs& a, const Streams& io) {
  RunConfig cfg = config_or_default(a.config);
  apply_train_overrides(cfg, a);
  require_existing(cfg, {PathRole::kCorpus});
  std::filesystem::path out_path;
  if (!a.out.empty()) {
    out_path = a.out;
  } else if (cfg.paths.model) {
    out_path = *cfg.paths.model;
  } else {
    throw_error(ErrorCode::kInvalidConfig, "train-toy needs --out or paths.model");
  }
  std::optional<std::ofstream> log_file;
  const std::string log_path = !a.log.empty() ? a.log : cfg.paths.log ? cfg.paths.log->string() : "";
  if (!log_path.empty()) {
    log_file.emplace(log_path);
    if (!*log_file) throw_error(ErrorCode::kIo, "cannot open " + log_path);
  }

  const MarkovTarget target(cfg.target);
  const std::vector<TokenSequence> corpus = training_corpus(cfg, target);
  TrainRecord last;
  const ToyDraft model = train_toy_draft(
      target, corpus, cfg.train.draft, cfg.train.train, [&](const TrainRecord& r, const ToyDraft&) {
        last = r;
        if (log_file) write_train_record(*log_file, r);
        if (io.as_json) {
          std::ostringstream line;
          write_train_record(line, r);
          json j = json::parse(line.str());
          j["type"] = "train";
          io.emit(j);
        } else {
          io.out << "step " << r.step << "  loss " << format_double("%.6f", r.loss) << "  acc";
          for (const double acc : r.accuracy) io.out << " " << format_double("%.3f", acc);
          io.out << "\n";
        }
      });
  model.save(out_path);
  if (io.as_json) {
    io.emit({{"type", "model"},
             {"path", out_path.string()},
             {"parameters", model.params().size()},
             {"steps", cfg.train.train.steps},
             {"gamma", cfg.train.train.kl.gamma},
             {"shifted", cfg.train.draft.shifted}});
  } else {
    io.out << "wrote " << out_path.string() << " (" << model.params().size() << " parameters)\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string config;
  std::string drafter = "auto";
  std::string sweep_gamma;
  std::optional<int> steps;
};

struct EvalRow {
  std::string name;
  double gamma = 0.0;
  AccuracyReport acc;
  double tau = 0.0;
};

double measure_tau(const RunConfig& cfg, const MarkovTarget& target, const DraftPredictor& drafter,
                   const NgramTrie* trie, std::span<const TokenSequence> held_out) {
  long tokens = 0;
  long cycles = 0;
  const int prompt_len = std::max(cfg.target.order, cfg.eval.min_prefix);
  const int n = std::min<int>(cfg.eval.decode_prompts, static_cast<int>(held_out.size()));
  for (int i = 0; i < n; ++i) {
    const auto& seq = held_out[static_cast<std::size_t>(i)];
    if (static_cast<int>(seq.size()) < prompt_len) continue;
    DecodeConfig dc = cfg.decode;
    dc.seed = cfg.decode.seed + static_cast<std::uint64_t>(i);
    const DecodeResult r =
        decode(std::span(seq).first(static_cast<std::size_t>(prompt_len)), target, drafter, trie, dc);
    tokens += r.metrics.tokens_out;
    cycles += r.metrics.cycles;
  }
  return cycles > 0 ? static_cast<double>(tokens) / static_cast<double>(cycles) : 0.0;
}

int cmd_eval(const EvalArgs& a, const Streams& io) {
  RunConfig cfg = config_or_default(a.config);
  if (a.steps) cfg.train.train.steps = *a.steps;
  cfg.validate();
  require_existing(cfg, {PathRole::kTrie, PathRole::kModel, PathRole::kCorpus});
  const MarkovTarget target(cfg.target);
  const std::vector<TokenSequence> held_out = held_out_corpus(cfg, target);
  std::optional<NgramTrie> trie;
  if (cfg.paths.trie) trie = load_trie(cfg, io, false);
  const NgramTrie* trie_ptr = trie ? &*trie : nullptr;
  const int d = cfg.decode.draft_len;

  std::vector<EvalRow> rows;
  if (!a.sweep_gamma.empty()) {
    std::vector<double> gammas;
    std::stringstream ss(a.sweep_gamma);
    for (std::string item; std::getline(ss, item, ',');) {
      try {
        gammas.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw_error(ErrorCode::kInvalidConfig, "bad gamma '" + item + "' in --sweep-gamma");
      }
    }
    const std::vector<TokenSequence> corpus = training_corpus(cfg, target);
    for (const double g : gammas) {
      RunConfig run = cfg;
      run.train.train.kl.gamma = g;
      run.validate();
      const ToyDraft model = train_toy_draft(target, corpus, run.train.draft, run.train.train);
      EvalRow row{"toy", g, evaluate_accuracy(model, target, held_out, d, cfg.eval.min_prefix), 0.0};
      row.tau = measure_tau(cfg, target, model, trie_ptr, held_out);
      rows.push_back(std::move(row));
    }
  } else {
    const DrafterChoice drafter = make_drafter(a.drafter, cfg, target);
    EvalRow row{drafter.name, cfg.train.train.kl.gamma,
                evaluate_accuracy(*drafter.drafter, target, held_out, d, cfg.eval.min_prefix), 0.0};
    row.tau = measure_tau(cfg, target, *drafter.drafter, trie_ptr, held_out);
    rows.push_back(std::move(row));
  }

  if (io.as_json) {
    for (const auto& r : rows) {
      io.emit({{"type", "eval"},
               {"drafter", r.name},
               {"gamma", r.gamma},
               {"alpha", r.acc.alpha},
               {"samples", r.acc.counts.empty() ? 0 : r.acc.counts[0]},
               {"tau", r.tau}});
    }
    return kExitOk;
  }
  io.out << "drafter      gamma";
  for (int t = 1; t <= d; ++t) io.out << format_double("  alpha-%-2.0f", t);
  io.out << "     tau\n";
  for (const auto& r : rows) {
    char head[64];
    std::snprintf(head, sizeof(head), "%-12s %5.2f", r.name.c_str(), r.gamma);
    io.out << head;
    for (const double acc : r.acc.alpha) io.out << format_double("  %7.1f%%", 100.0 * acc);
    io.out << format_double("  %6.3f", r.tau) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate-speedup

struct SpeedupArgs {
  double tau = 1.0;
  double t_verify = 0.0;
  double t_draft = 0.0;
  double t_prune = 0.0;
  double t_base = 0.0;
};

int cmd_estimate_speedup(const SpeedupArgs& a, const Streams& io) {
  const SpeedupEstimate e = estimate_speedup(a.tau, a.t_verify, a.t_draft, a.t_prune, a.t_base);
  if (io.as_json) {
    io.emit({{"type", "speedup"},
             {"tau", a.tau},
             {"t_verify", a.t_verify},
             {"t_draft", a.t_draft},
             {"t_prune", a.t_prune},
             {"t_base", a.t_base},
             {"speedup", e.speedup},
             {"draft_ratio", e.draft_ratio}});
  } else {
    io.out << "speedup      " << format_double("%.6f", e.speedup) << "\n"
           << "draft_ratio  " << format_double("%.6f", e.draft_ratio) << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parallel drafting with n-gram guided tree pruning and lossless verification."};
  app.name("pardraft");
  app.require_subcommand(1);
  app.fallthrough();
  bool json_output = false;
  app.add_flag("--json", json_output, "Emit line-delimited JSON records");

  BuildTrieArgs bt;
  auto* build = app.add_subcommand("build-trie", "Build and save an n-gram trie");
  build->add_option("--corpus", bt.corpus, "Corpus file (one sequence per line)");
  build->add_option("--config", bt.config, "Run config; samples the toy target when no corpus");
  build->add_option("--format", bt.format, "Corpus format")
      ->check(CLI::IsMember({"ids", "text"}))
      ->capture_default_str();
  build->add_option("--order", bt.order, "N-gram order (>= 2)")->capture_default_str();
  build->add_option("--vocab", bt.vocab, "Vocabulary size (0 infers it)")->capture_default_str();
  build->add_option("--out", bt.out, "Output trie file")->required();

  DecodeArgs dc;
  auto* dec = app.add_subcommand("decode", "Speculative decode against the toy target");
  dec->add_option("--config", dc.config, "Run config (JSON)");
  dec->add_option("--prompt", dc.prompt, "Prompt token ids, space or comma separated");
  dec->add_option("--drafter", dc.drafter, "Draft predictor")
      ->check(CLI::IsMember(kDrafterKinds))
      ->capture_default_str();
  dec->add_option("--records", dc.records, "Write per-cycle JSON records here");
  dec->add_flag("--no-ngram", dc.no_ngram, "Score continuations at the epsilon floor");
  dec->add_flag("--baseline", dc.baseline, "Plain autoregressive decoding");
  dec->add_option("--max-tokens", dc.max_tokens, "Override decode.max_tokens");
  dec->add_option("--temperature", dc.temperature, "Override decode.temperature");
  dec->add_option("--seed", dc.seed, "Override the run seed");

  BenchArgs bn;
  auto* bench = app.add_subcommand("bench-trie", "Time children_scores queries");
  bench->add_option("--trie", bn.trie, "Trie file")->required();
  bench->add_option("--queries", bn.queries, "Timed queries")->capture_default_str();
  bench->add_option("--warmup", bn.warmup, "Untimed warmup queries")->capture_default_str();
  bench->add_option("--threads", bn.threads, "Worker threads")->capture_default_str();
  bench->add_option("--interval-ms", bn.interval_ms, "Averaging interval")->capture_default_str();
  bench->add_option("--seed", bn.seed, "Query sampling seed")->capture_default_str();

  TrainArgs tr;
  auto* train = app.add_subcommand("train-toy", "Train a toy parallel draft model");
  train->add_option("--config", tr.config, "Run config (JSON)");
  train->add_option("--out", tr.out, "Model output path (default paths.model)");
  train->add_option("--log", tr.log, "Training log output path (default paths.log)");
  train->add_option("--steps", tr.steps, "Override train.steps");
  train->add_option("--gamma", tr.gamma, "Override train.gamma");
  train->add_option("--lr", tr.learning_rate, "Override train.learning_rate");
  train->add_flag("--shifted,!--unshifted", tr.shifted, "Shifted or unshifted logits reading");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Per-position draft accuracy and acceptance length");
  eval->add_option("--config", ev.config, "Run config (JSON)");
  eval->add_option("--drafter", ev.drafter, "Draft predictor")
      ->check(CLI::IsMember(kDrafterKinds))
      ->capture_default_str();
  eval->add_option("--sweep-gamma", ev.sweep_gamma,
                   "Comma-separated gammas; trains one toy model per value");
  eval->add_option("--steps", ev.steps, "Override train.steps for --sweep-gamma");

  SpeedupArgs sp;
  auto* speed = app.add_subcommand("estimate-speedup", "Analytical speedup from stage latencies");
  speed->add_option("--tau", sp.tau, "Average acceptance length")->required();
  speed->add_option("--t-verify", sp.t_verify, "Verification time per cycle")->required();
  speed->add_option("--t-draft", sp.t_draft, "Draft forward time per cycle")->capture_default_str();
  speed->add_option("--t-prune", sp.t_prune, "Tree pruning time per cycle")->capture_default_str();
  speed->add_option("--t-base", sp.t_base, "One autoregressive target step")->required();

  std::vector<std::string> argv_rev;
  for (std::size_t i = args.size(); i > 1; --i) argv_rev.push_back(args[i - 1]);
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    const auto selected = app.get_subcommands();
    out << (selected.empty() ? app.help() : selected.front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (!app.get_subcommands().empty()) {
      err << app.get_subcommands().front()->help();
    } else {
      err << app.help();
    }
    return kExitConfig;
  }

  const Streams io{out, err, json_output};
  try {
    if (*build) return cmd_build_trie(bt, io);
    if (*dec) return cmd_decode(dc, io);
    if (*bench) return cmd_bench_trie(bn, io);
    if (*train) return cmd_train_toy(tr, io);
    if (*eval) return cmd_eval(ev, io);
    if (*speed) return cmd_estimate_speedup(sp, io);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace pardraft::tools
