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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "support/oracles.h"

namespace pardraft {
namespace {

constexpr TokenId a = 0, b = 1, c = 2, d = 3;

std::vector<TokenSequence> random_corpus(std::mt19937_64& rng, int vocab, int max_tokens) {
  std::uniform_int_distribution<int> len(0, 40);
  std::uniform_int_distribution<TokenId> tok(0, vocab - 1);
  std::vector<TokenSequence> corpus;
  int total = 0;
  while (total < max_tokens) {
    TokenSequence seq(static_cast<std::size_t>(len(rng)));
    for (auto& t : seq) t = tok(rng);
    total += static_cast<int>(seq.size()) + 1;
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

TEST(NgramTrieTest, RepeatedBigramCounts) {
  const std::vector<TokenSequence> corpus = {{a, b, a, b, a}};
  const NgramTrie trie = NgramTrie::build(corpus, 3, 4);
  const TokenSequence ab = {a, b}, ba = {b, a};
  EXPECT_EQ(trie.children_scores(ab), (std::vector<ScoredToken>{{a, std::log(1.0 + 1e-9)}}));
  EXPECT_EQ(trie.path_count(TokenSequence{a, b, a}), 2u);
  EXPECT_EQ(trie.path_count(TokenSequence{b, a, b}), 1u);
  EXPECT_NEAR(trie.score(ab, a), 0.0, 1e-8);
  EXPECT_EQ(trie.children_scores(ba), (std::vector<ScoredToken>{{b, std::log(1.0 + 1e-9)}}));
}

TEST(NgramTrieTest, BranchingContext) {
  const std::vector<TokenSequence> corpus = {{a, b, c, a, b, d}};
  const NgramTrie trie = NgramTrie::build(corpus, 3, 4);
  const TokenSequence ab = {a, b};
  const auto scores = trie.children_scores(ab);
  ASSERT_EQ(scores.size(), 2u);
  EXPECT_EQ(scores[0].token, c);
  EXPECT_EQ(scores[1].token, d);
  EXPECT_DOUBLE_EQ(scores[0].score, std::log(0.5 + 1e-9));
  EXPECT_DOUBLE_EQ(trie.score(ab, c), std::log(0.5 + 1e-9));
}

TEST(NgramTrieTest, UnseenContextIsFloor) {
  const std::vector<TokenSequence> corpus = {{a, b, c}};
  const NgramTrie trie = NgramTrie::build(corpus, 3, 4);
  const TokenSequence dd = {d, d};
  EXPECT_NEAR(trie.score(dd, a), -20.7232658, 1e-6);
  EXPECT_TRUE(trie.children_scores(dd).empty());
  EXPECT_FALSE(trie.locate(dd).found());
}

TEST(NgramTrieTest, EmptyCorpusIsRootOnly) {
  const std::vector<TokenSequence> corpus = {{}};
  const NgramTrie trie = NgramTrie::build(corpus, 3, 4);
  EXPECT_EQ(trie.node_count(), 1u);
  EXPECT_EQ(trie.stats().distinct_contexts, 0u);
}

TEST(NgramTrieTest, RejectsBadOrderAndVocab) {
  const std::vector<TokenSequence> corpus = {{a, b}, {a, 9}};
  try {
    NgramTrie::build(corpus, 3, 4);
    FAIL() << "expected an out-of-vocabulary error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfVocabulary);
    EXPECT_NE(std::string(e.what()).find("sequence 1"), std::string::npos) << e.what();
  }
  try {
    NgramTrie::build(corpus, 1, 16);
    FAIL() << "expected an invalid-config error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
  }
}

TEST(NgramTrieTest, LongContextUsesTrailingTokens) {
  const std::vector<TokenSequence> corpus = {{a, b, c, a, b, d}};
  const NgramTrie trie = NgramTrie::build(corpus, 3, 4);
  const TokenSequence long_ctx = {d, d, c, a, b};
  EXPECT_EQ(trie.children_scores(long_ctx), trie.children_scores(TokenSequence{a, b}));
}

TEST(NgramTrieTest, ShortContextDescendsPartway) {
  const std::vector<TokenSequence> corpus = {{a, b, c, a, b, d}};
  const NgramTrie trie = NgramTrie::build(corpus, 3, 4);
  // Windows abc, bca, cab, abd: after "a" comes b twice.
  EXPECT_NEAR(trie.score(TokenSequence{a}, b), 0.0, 1e-8);
  // Root continuations are window starts: a twice, b once, c once.
  EXPECT_DOUBLE_EQ(trie.score(TokenSequence{}, a), std::log(0.5 + 1e-9));
}

TEST(NgramTrieTest, MatchesWindowCounterOnRandomCorpora) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int vocab = 2 + static_cast<int>(rng() % 63);
    const int order = 2 + static_cast<int>(rng() % 3);
    const auto corpus = random_corpus(rng, vocab, 2000);
    const NgramTrie trie = NgramTrie::build(corpus, order, vocab);
    const testing::WindowCounter oracle(corpus, order);
    for (const auto& [path, count] : oracle.all()) {
      ASSERT_EQ(trie.path_count(path), count);
    }
    std::uniform_int_distribution<TokenId> tok(0, vocab - 1);
    for (int q = 0; q < 200; ++q) {
      TokenSequence ctx(static_cast<std::size_t>(rng() % order));
      for (auto& t : ctx) t = tok(rng);
      const TokenId t = tok(rng);
      ASSERT_EQ(trie.score(ctx, t), oracle.score(ctx, t));
      const auto kids = oracle.children(ctx);
      const auto scored = trie.children_scores(ctx);
      ASSERT_EQ(scored.size(), kids.size());
      double sum = 0.0;
      for (const auto& s : scored) {
        ASSERT_EQ(s.score, oracle.score(ctx, s.token));
        sum += trie.locate(ctx).probability(s.token);
      }
      if (!kids.empty()) EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(NgramTrieTest, RoundTripPreservesStructure) {
  std::mt19937_64 rng(5);
  const auto corpus = random_corpus(rng, 30, 3000);
  const NgramTrie trie = NgramTrie::build(corpus, 3, 30);
  std::stringstream buf;
  trie.write(buf);
  EXPECT_EQ(buf.str().size(), trie.stats().bytes_on_disk);
  const NgramTrie back = NgramTrie::read(buf);
  EXPECT_TRUE(back == trie);
  EXPECT_EQ(back.stats(), trie.stats());
  trie.for_each_path(2, [&](std::span<const TokenId> ctx) {
    ASSERT_EQ(back.children_scores(ctx), trie.children_scores(ctx));
  });
}

TEST(NgramTrieTest, SaveLoadFile) {
  const auto path = std::filesystem::temp_directory_path() / "pardraft_trie_test.bin";
  const std::vector<TokenSequence> corpus = {{a, b, c, a, b, d}};
  const NgramTrie trie = NgramTrie::build(corpus, 3, 4);
  trie.save(path);
  EXPECT_EQ(std::filesystem::file_size(path), trie.stats().bytes_on_disk);
  EXPECT_TRUE(NgramTrie::load(path) == trie);
  std::filesystem::remove(path);
  EXPECT_THROW(NgramTrie::load(path), Error);
}

ErrorCode read_error(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    NgramTrie::read(in);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "read succeeded";
  return ErrorCode::kIo;
}

TEST(NgramTrieTest, LoadErrorsAreDistinct) {
  const std::vector<TokenSequence> corpus = {{a, b, c, a, b, d}};
  std::stringstream buf;
  NgramTrie::build(corpus, 3, 4).write(buf);
  const std::string good = buf.str();

  EXPECT_EQ(read_error(""), ErrorCode::kTruncatedFile);
  EXPECT_EQ(read_error(good.substr(0, good.size() - 1)), ErrorCode::kTruncatedFile);
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(read_error(bad_magic), ErrorCode::kBadMagic);
  std::string bad_version = good;
  bad_version[8] = 7;
  EXPECT_EQ(read_error(bad_version), ErrorCode::kVersionMismatch);
  EXPECT_EQ(read_error(good + "x"), ErrorCode::kCorruptFile);
}

TEST(NgramTrieTest, ConcurrentQueriesLeaveStatsUnchanged) {
  std::mt19937_64 rng(9);
  const auto corpus = random_corpus(rng, 16, 5000);
  const NgramTrie trie = NgramTrie::build(corpus, 3, 16);
  const TrieStats before = trie.stats();
  std::vector<double> sums(4, 0.0);
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < 4; ++w) {
      pool.emplace_back([&, w] {
        std::mt19937_64 local(static_cast<std::uint64_t>(w));
        for (int i = 0; i < 250000; ++i) {
          const TokenSequence ctx = {static_cast<TokenId>(local() % 16),
                                     static_cast<TokenId>(local() % 16)};
          for (const auto& s : trie.children_scores(ctx)) sums[w] += s.score;
        }
      });
    }
  }
  EXPECT_EQ(trie.stats(), before);
}

TEST(NgramTrieTest, DistinctContextsCountsFullLengthContexts) {
  const std::vector<TokenSequence> corpus = {{a, b, c, a, b, d}};
  const NgramTrie trie = NgramTrie::build(corpus, 3, 4);
  // ab, bc, ca
  EXPECT_EQ(trie.stats().distinct_contexts, 3u);
  // root + {a, b, c} + {ab, bc, ca} + {abc, abd, bca, cab}
  EXPECT_EQ(trie.stats().node_count, 11u);
}

}  // namespace
}  // namespace pardraft
