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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "commands.h"
#include "pardraft/ngram_trie.h"
#include "run_config.h"

namespace pardraft::tools {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
  int code = 0;
  std::string out;
  std::string err;
};

RunResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "pardraft");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<json> records(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

json find_record(const std::string& text, const std::string& type) {
  for (const auto& r : records(text)) {
    if (r.at("type") == type) return r;
  }
  ADD_FAILURE() << "no " << type << " record in:\n" << text;
  return {};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pardraft_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST(RunConfigTest, DefaultsMatchPruningConstants) {
  const RunConfig cfg = default_run_config();
  EXPECT_EQ(cfg.prune.top_k, 25);
  EXPECT_EQ(cfg.prune.beam_width, 20);
  EXPECT_EQ(cfg.prune.max_nodes, 59);
  EXPECT_EQ(cfg.prune.ngram_weight, 0.5);
  EXPECT_EQ(cfg.train.train.kl.gamma, 0.6);
  EXPECT_EQ(cfg.decode.draft_len, 8);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(RunConfigTest, ParsesSections) {
  const RunConfig cfg = parse_run_config(R"({
    "seed": 9,
    "target": {"vocab_size": 16, "order": 2},
    "prune": {"top_k": 4, "max_nodes": 10},
    "decode": {"draft_len": 3, "temperature": 0.5},
    "train": {"gamma": 0.8, "optimizer": "adam", "shifted": false,
              "data": {"num_sequences": 5, "temperature": 0}},
    "paths": {"trie": "t.bin"}
  })", "/base");
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.decode.seed, 9u);
  EXPECT_EQ(cfg.train.train.seed, 9u);
  EXPECT_EQ(cfg.target.vocab_size, 16);
  EXPECT_EQ(cfg.decode.prune.top_k, 4);
  EXPECT_EQ(cfg.decode.draft_len, 3);
  EXPECT_EQ(cfg.train.train.kl.draft_len, 3);
  EXPECT_EQ(cfg.train.train.kl.gamma, 0.8);
  EXPECT_EQ(cfg.train.train.optimizer, Optimizer::kAdam);
  EXPECT_FALSE(cfg.train.draft.shifted);
  EXPECT_EQ(cfg.train.data.num_sequences, 5);
  EXPECT_EQ(cfg.train.data.temperature, 0.0);
  EXPECT_EQ(*cfg.paths.trie, fs::path("/base/t.bin"));
}

TEST(RunConfigTest, RejectsUnknownKeysAndBadValues) {
  auto code_of = [](const std::string& text) {
    try {
      parse_run_config(text);
    } catch (const Error& e) {
      return std::make_pair(e.code(), std::string(e.what()));
    }
    return std::make_pair(ErrorCode::kIo, std::string());
  };
  auto [code, what] = code_of(R"({"prune": {"topk": 3}})");
  EXPECT_EQ(code, ErrorCode::kInvalidConfig);
  EXPECT_NE(what.find("topk"), std::string::npos) << what;
  EXPECT_EQ(code_of(R"({"colour": 1})").first, ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of(R"({"prune": {"top_k": "many"}})").first, ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of(R"({"train": {"gamma": 0}})").first, ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of(R"({"train": {"optimizer": "lbfgs"}})").first, ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of("{not json").first, ErrorCode::kInvalidConfig);
}

TEST_F(CliTest, ConfigPathsMustExist) {
  const std::string cfg = write("c.json", R"({"paths": {"trie": "missing.bin"}})");
  const RunConfig parsed = load_run_config(cfg);
  try {
    require_existing(parsed, {PathRole::kTrie});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
  EXPECT_EQ(run({"decode", "--config", cfg}).code, kExitIo);
  EXPECT_EQ(run({"decode", "--config", path("nope.json")}).code, kExitIo);
}

TEST(CliHelpTest, ListsEveryVerb) {
  const RunResult r = run({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  for (const char* verb :
       {"build-trie", "decode", "bench-trie", "train-toy", "eval", "estimate-speedup", "--json"}) {
    EXPECT_NE(r.out.find(verb), std::string::npos) << verb;
  }
  const RunResult sub = run({"decode", "--help"});
  EXPECT_EQ(sub.code, kExitOk);
  EXPECT_NE(sub.out.find("--no-ngram"), std::string::npos) << sub.out;
  EXPECT_EQ(run({}).code, kExitConfig);
  EXPECT_EQ(run({"frobnicate"}).code, kExitConfig);
}

TEST(CliSpeedupTest, TextAndJson) {
  RunResult r = run({"estimate-speedup", "--tau", "4", "--t-verify", "20", "--t-base", "20"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("speedup      4.000000"), std::string::npos) << r.out;
  r = run({"--json", "estimate-speedup", "--tau", "3.67", "--t-verify", "20", "--t-draft", "1.5",
           "--t-prune", "2", "--t-base", "20"});
  const json rec = find_record(r.out, "speedup");
  EXPECT_NEAR(rec.at("speedup").get<double>(), 3.67 * 20 / 23.5, 1e-12);
  EXPECT_EQ(run({"estimate-speedup", "--tau", "0.5", "--t-verify", "1", "--t-base", "1"}).code,
            kExitConfig);
}

TEST_F(CliTest, BuildTrieHandCount) {
  const std::string corpus = write("demo.txt", "1 2 3 1 2\n");
  const RunResult r =
      run({"--json", "build-trie", "--corpus", corpus, "--order", "3", "--out", path("t.bin")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  // Windows 123, 231, 312 give nine paths below the root.
  EXPECT_EQ(find_record(r.out, "trie_stats").at("node_count"), 10);
  EXPECT_EQ(NgramTrie::load(path("t.bin")).node_count(), 10u);
}

TEST_F(CliTest, BuildTrieEmptyCorpusWarns) {
  const std::string corpus = write("empty.txt", "");
  const RunResult r = run({"build-trie", "--corpus", corpus, "--out", path("t.bin")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_EQ(NgramTrie::load(path("t.bin")).node_count(), 1u);
}

TEST_F(CliTest, BuildTrieErrors) {
  const std::string corpus = write("demo.txt", "1 2 3\n4 x 5\n");
  RunResult r = run({"build-trie", "--corpus", corpus, "--out", path("t.bin")});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("demo.txt:2"), std::string::npos) << r.err;
  const std::string good = write("good.txt", "1 2 3\n");
  EXPECT_EQ(run({"build-trie", "--corpus", good, "--order", "1", "--out", path("t.bin")}).code,
            kExitConfig);
  EXPECT_EQ(run({"build-trie", "--corpus", path("absent.txt"), "--out", path("t.bin")}).code,
            kExitIo);
  EXPECT_EQ(run({"build-trie", "--corpus", good}).code, kExitConfig);
}

TEST_F(CliTest, GreedyDecodeMatchesBaseline) {
  const std::string cfg = write("c.json", R"({"seed": 3, "decode": {"max_tokens": 40}})");
  for (const char* drafter : {"oracle", "uniform", "marginal", "adversarial"}) {
    const RunResult spec =
        run({"--json", "decode", "--config", cfg, "--prompt", "4", "--drafter", drafter});
    ASSERT_EQ(spec.code, kExitOk) << spec.err;
    const RunResult base = run({"--json", "decode", "--config", cfg, "--prompt", "4", "--baseline"});
    ASSERT_EQ(base.code, kExitOk) << base.err;
    EXPECT_EQ(find_record(spec.out, "transcript").at("tokens"),
              find_record(base.out, "transcript").at("tokens"))
        << drafter;
  }
}

TEST_F(CliTest, DecodeWithAndWithoutNgram) {
  const std::string cfg_path = write("c.json", R"({"seed": 2, "paths": {"trie": "t.bin"},
      "train": {"data": {"num_sequences": 64, "sequence_length": 64}}})");
  ASSERT_EQ(run({"build-trie", "--config", cfg_path, "--out", path("t.bin")}).code, kExitOk);
  const RunResult with = run({"--json", "decode", "--config", cfg_path, "--drafter", "marginal"});
  const RunResult without =
      run({"--json", "decode", "--config", cfg_path, "--drafter", "marginal", "--no-ngram"});
  ASSERT_EQ(with.code, kExitOk) << with.err;
  ASSERT_EQ(without.code, kExitOk) << without.err;
  EXPECT_EQ(find_record(with.out, "transcript").at("ngram"), true);
  EXPECT_EQ(find_record(without.out, "transcript").at("ngram"), false);
  EXPECT_GE(find_record(with.out, "metrics").at("tau").get<double>(), 1.0);
  EXPECT_GE(find_record(without.out, "metrics").at("tau").get<double>(), 1.0);
}

TEST_F(CliTest, DecodeSingleTokenAndRecords) {
  const RunResult r = run({"--json", "decode", "--max-tokens", "1", "--records", path("r.jsonl")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(find_record(r.out, "metrics").at("cycles"), 1);
  std::ifstream in(path("r.jsonl"));
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(json::parse(line).at("emitted"), 1);
}

TEST_F(CliTest, DecodeRejectsBadPrompt) {
  EXPECT_EQ(run({"decode", "--prompt", "999"}).code, kExitConfig);
  EXPECT_EQ(run({"decode", "--prompt", "a b"}).code, kExitConfig);
  EXPECT_NE(run({"decode"}).err.find("epsilon floor"), std::string::npos);
}

TEST_F(CliTest, BenchTrieThreadsAgree) {
  const std::string cfg = write("c.json", R"({"train": {"data": {"num_sequences": 8}}})");
  ASSERT_EQ(run({"build-trie", "--config", cfg, "--out", path("t.bin")}).code, kExitOk);
  const RunResult one = run({"--json", "bench-trie", "--trie", path("t.bin"), "--queries", "2000",
                             "--warmup", "10", "--threads", "1"});
  const RunResult four = run({"--json", "bench-trie", "--trie", path("t.bin"), "--queries", "2000",
                              "--warmup", "10", "--threads", "4"});
  ASSERT_EQ(one.code, kExitOk) << one.err;
  ASSERT_EQ(four.code, kExitOk) << four.err;
  EXPECT_EQ(find_record(one.out, "bench_trie").at("checksum"),
            find_record(four.out, "bench_trie").at("checksum"));
  const RunResult none = run({"--json", "bench-trie", "--trie", path("t.bin"), "--queries", "0"});
  EXPECT_EQ(none.code, kExitOk) << none.err;
  EXPECT_TRUE(find_record(none.out, "bench_trie").at("histogram").empty());
  EXPECT_EQ(run({"bench-trie", "--trie", path("absent.bin")}).code, kExitIo);
}

TEST_F(CliTest, TrainToyIsReproducible) {
  const std::string cfg = write("c.json", R"({"target": {"vocab_size": 8},
      "decode": {"draft_len": 3},
      "prune": {"top_k": 4},
      "train": {"steps": 15, "log_every": 5, "data": {"num_sequences": 4, "sequence_length": 12}}})");
  const RunResult a = run({"train-toy", "--config", cfg, "--out", path("a.bin"), "--log", path("a.log")});
  const RunResult b = run({"train-toy", "--config", cfg, "--out", path("b.bin"), "--log", path("b.log")});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  ASSERT_EQ(b.code, kExitOk) << b.err;
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_FALSE(slurp(path("a.log")).empty());
  EXPECT_EQ(slurp(path("a.log")), slurp(path("b.log")));
  EXPECT_EQ(slurp(path("a.bin")), slurp(path("b.bin")));

  const std::string model_cfg = write("m.json", R"({"target": {"vocab_size": 8},
      "decode": {"draft_len": 3, "max_tokens": 20}, "prune": {"top_k": 4},
      "paths": {"model": "a.bin"}})");
  const RunResult dec = run({"--json", "decode", "--config", model_cfg, "--drafter", "toy"});
  ASSERT_EQ(dec.code, kExitOk) << dec.err;
  EXPECT_EQ(find_record(dec.out, "transcript").at("drafter"), "toy");
}

TEST_F(CliTest, TrainToyDivergenceExitCode) {
  const std::string cfg = write("c.json", R"({"target": {"vocab_size": 8},
      "decode": {"draft_len": 3}, "prune": {"top_k": 4},
      "train": {"steps": 200, "learning_rate": 500,
                "data": {"num_sequences": 4, "sequence_length": 12}}})");
  const RunResult r = run({"train-toy", "--config", cfg, "--out", path("a.bin")});
  EXPECT_EQ(r.code, kExitDivergence) << r.err;
  EXPECT_EQ(run({"train-toy", "--config", write("bad.json", R"({"train": {"stepz": 1}})"),
                 "--out", path("b.bin")})
                .code,
            kExitConfig);
}

TEST_F(CliTest, EvalOracleIsPerfectOnGreedyData) {
  const std::string cfg = write("c.json", R"({"eval": {"decode_prompts": 2,
      "data": {"num_sequences": 8, "sequence_length": 24, "temperature": 0}}})");
  const RunResult r = run({"--json", "eval", "--config", cfg, "--drafter", "oracle"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json rec = find_record(r.out, "eval");
  EXPECT_EQ(rec.at("alpha").at(0).get<double>(), 1.0);
  const RunResult text = run({"eval", "--config", cfg, "--drafter", "oracle"});
  EXPECT_NE(text.out.find("alpha-1"), std::string::npos) << text.out;
  EXPECT_NE(text.out.find("100.0%"), std::string::npos) << text.out;
}

TEST(ExitCodeTest, Mapping) {
  EXPECT_EQ(exit_code_for(ErrorCode::kInvalidConfig), kExitConfig);
  EXPECT_EQ(exit_code_for(ErrorCode::kOutOfVocabulary), kExitConfig);
  EXPECT_EQ(exit_code_for(ErrorCode::kIo), kExitIo);
  EXPECT_EQ(exit_code_for(ErrorCode::kBadMagic), kExitIo);
  EXPECT_EQ(exit_code_for(ErrorCode::kTruncatedFile), kExitIo);
  EXPECT_EQ(exit_code_for(ErrorCode::kDivergence), kExitDivergence);
  EXPECT_NE(kExitConfig, kExitIo);
  EXPECT_NE(kExitIo, kExitDivergence);
}

}  // namespace
}  // namespace pardraft::tools
