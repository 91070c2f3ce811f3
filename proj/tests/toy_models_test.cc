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

#include "pardraft/toy_models.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "pardraft/spec_engine.h"

namespace pardraft {
namespace {

TEST(MarkovTargetTest, SameSeedSameTable) {
  const MarkovTarget a = sample_markov_target(5, 6, 2);
  const MarkovTarget b = sample_markov_target(5, 6, 2);
  const MarkovTarget c = sample_markov_target(6, 6, 2);
  ASSERT_EQ(a.num_contexts(), 36u);
  bool differs = false;
  for (std::size_t ctx = 0; ctx < a.num_contexts(); ++ctx) {
    for (int v = 0; v < 6; ++v) {
      EXPECT_EQ(a.row(ctx)[v], b.row(ctx)[v]);
      differs |= a.row(ctx)[v] != c.row(ctx)[v];
    }
  }
  EXPECT_TRUE(differs);
  const TokenSequence tokens = {1, 4, 2, 5};
  EXPECT_TRUE(a.features(tokens).isApprox(b.features(tokens), 0.0));
}

TEST(MarkovTargetTest, RowsSumToOne) {
  for (const int order : {1, 2, 3}) {
    const MarkovTarget t = sample_markov_target(order, 7, order, 6.0);
    for (std::size_t ctx = 0; ctx < t.num_contexts(); ++ctx) {
      double sum = 0.0;
      for (const double p : t.row(ctx)) {
        EXPECT_GE(p, 0.0);
        sum += p;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(MarkovTargetTest, GreedyContinuationReproducible) {
  auto greedy = [](const MarkovTarget& t) {
    TokenSequence seq = {2, 3};
    for (int i = 0; i < 30; ++i) seq.push_back(t.greedy_token(seq));
    return seq;
  };
  const MarkovTarget t = sample_markov_target(7, 4, 2);
  const TokenSequence first = greedy(t);
  EXPECT_EQ(greedy(sample_markov_target(7, 4, 2)), first);
  // Recompute from the transition table: the context is the last two tokens.
  for (std::size_t i = 2; i < first.size(); ++i) {
    const std::size_t ctx = static_cast<std::size_t>(first[i - 2]) * 4 + first[i - 1];
    const auto row = t.row(ctx);
    EXPECT_EQ(first[i], std::max_element(row.begin(), row.end()) - row.begin());
  }
}

TEST(MarkovTargetTest, ShortPrefixIsLeftPadded) {
  const MarkovTarget t = sample_markov_target(3, 5, 3);
  EXPECT_EQ(t.distribution(TokenSequence{4}), t.distribution(TokenSequence{0, 0, 4}));
  EXPECT_EQ(t.distribution(TokenSequence{1, 2, 3, 4}), t.distribution(TokenSequence{2, 3, 4}));
}

TEST(MarkovTargetTest, RejectsInvalidDimsAndTokens) {
  EXPECT_THROW(sample_markov_target(0, 1, 1), Error);
  EXPECT_THROW(sample_markov_target(0, 4, 0), Error);
  EXPECT_THROW(sample_markov_target(0, 1024, 4), Error);
  const MarkovTarget t = sample_markov_target(0, 4, 1);
  try {
    t.distribution(TokenSequence{9});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfVocabulary);
  }
}

TEST(MarkovTargetTest, FeatureRowDependsOnEarlierTokensOnly) {
  const MarkovTarget t = sample_markov_target(2, 8, 2);
  const TokenSequence tokens = {1, 7, 3, 3, 0, 5};
  const Eigen::MatrixXd full = t.features(tokens);
  ASSERT_EQ(full.rows(), 6);
  ASSERT_EQ(full.cols(), 24);
  for (std::size_t j = 1; j <= tokens.size(); ++j) {
    const TokenSequence head(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(j));
    EXPECT_TRUE(t.features(head).isApprox(full.topRows(static_cast<Eigen::Index>(j)), 0.0));
  }
  TokenSequence changed = tokens;
  changed[5] = 6;
  EXPECT_TRUE(t.features(changed).isApprox(full, 0.0));
}

TEST(MarkovTargetTest, CorpusIsDeterministicAndInRange) {
  const MarkovTarget t = sample_markov_target(2, 8, 2);
  const auto a = t.sample_corpus(4, 50, 9);
  EXPECT_EQ(a, t.sample_corpus(4, 50, 9));
  for (const auto& s : a) {
    ASSERT_EQ(s.size(), 50u);
    for (const TokenId x : s) EXPECT_TRUE(x >= 0 && x < 8);
  }
  const auto greedy = t.sample_corpus(2, 20, 3, 0.0);
  for (const auto& s : greedy) {
    for (std::size_t i = 2; i < s.size(); ++i) {
      EXPECT_EQ(s[i], t.greedy_token(std::span<const TokenId>(s).first(i)));
    }
  }
}

TEST(MarkovTargetTest, CeilingIsAProbability) {
  const MarkovTarget t = sample_markov_target(1, 8, 1);
  const double c = t.greedy_accuracy_ceiling();
  EXPECT_GT(c, 1.0 / 8);
  EXPECT_LE(c, 1.0);
}

ToyDraft make_draft(const MarkovTarget& target, bool shifted, std::uint64_t seed = 1) {
  ToyDraftConfig cfg;
  cfg.vocab_size = target.vocab_size();
  cfg.shifted = shifted;
  return ToyDraft(cfg, target.embedding(), seed);
}

TEST(ToyDraftTest, OutputShapeAndSingleForward) {
  const MarkovTarget target = sample_markov_target(1, 8, 1);
  for (const bool shifted : {true, false}) {
    const ToyDraft model = make_draft(target, shifted);
    for (const int d : {1, 2, 8}) {
      const auto before = model.attention_calls();
      const ParallelLogits logits = model.predict(TokenSequence{1, 2, 3}, target, d);
      EXPECT_EQ(model.attention_calls(), before + 1);
      EXPECT_EQ(logits.draft_len(), d);
      EXPECT_EQ(logits.vocab_size(), 8);
    }
  }
}

TEST(ToyDraftTest, ReadSlots) {
  const MarkovTarget target = sample_markov_target(1, 8, 1);
  EXPECT_EQ(make_draft(target, true).read_slots(5, 3), (std::vector<int>{4, 5, 6}));
  EXPECT_EQ(make_draft(target, false).read_slots(5, 3), (std::vector<int>{5, 6, 7}));
  EXPECT_EQ(make_draft(target, true).num_masks(1), 0);
  EXPECT_EQ(make_draft(target, false).num_masks(1), 1);
}

TEST(ToyDraftTest, ShiftedAlignment) {
  // Zero the attention and projection and make the head read the token
  // embedding: the last prefix slot then scores exactly E * e(last token),
  // while every mask slot only sees the mask embedding.
  const MarkovTarget target = sample_markov_target(4, 8, 1);
  ToyDraft model = make_draft(target, true);
  ToyDraftParams& p = model.params();
  p.wv.setZero();
  p.wo.setZero();
  p.fc_w.setZero();
  p.fc_b.setZero();
  p.head_b.setZero();
  p.head_w.setZero();
  p.head_w.rightCols(MarkovTarget::kEmbedDim) = target.embedding();
  p.mask_emb.setZero();
  p.mask_emb(16 + 2) = 1.0;  // a fixed, recognisable mask signal

  const TokenSequence prefix = {3, 1, 6};
  const ParallelLogits out = model.predict(prefix, target, 3);
  const Eigen::VectorXd last = target.embedding() * target.embedding().row(6).transpose();
  for (int v = 0; v < 8; ++v) {
    EXPECT_NEAR(out.row(0)[v], last(v), 1e-12);
    EXPECT_NEAR(out.row(1)[v], target.embedding()(v, 2), 1e-12);
    EXPECT_NEAR(out.row(2)[v], target.embedding()(v, 2), 1e-12);
  }
}

TEST(ToyDraftTest, PredictReadsForwardAtReadSlots) {
  const MarkovTarget target = sample_markov_target(4, 8, 2);
  const TokenSequence prefix = {3, 1, 6, 2};
  for (const bool shifted : {true, false}) {
    const ToyDraft model = make_draft(target, shifted, 3);
    const int d = 4;
    const RowMatrix all = model.forward(inference_layout(4, model.num_masks(d)), prefix,
                                        target.features(prefix));
    const ParallelLogits out = model.predict(prefix, target, d);
    const auto slots = model.read_slots(4, d);
    for (int t = 0; t < d; ++t) {
      for (int v = 0; v < 8; ++v) EXPECT_EQ(out.row(t)[v], all(slots[t], v));
    }
  }
}

TEST(ToyDraftTest, DepthOneReadsLastPrefixSlot) {
  const MarkovTarget target = sample_markov_target(4, 8, 1);
  const ToyDraft model = make_draft(target, true, 5);
  const TokenSequence prefix = {2, 5};
  const RowMatrix all = model.forward(inference_layout(2, 0), prefix, target.features(prefix));
  ASSERT_EQ(all.rows(), 2);
  const ParallelLogits out = model.predict(prefix, target, 1);
  for (int v = 0; v < 8; ++v) EXPECT_EQ(out.row(0)[v], all(1, v));
}

TEST(ToyDraftTest, FutureInputsDoNotChangeEarlierSlots) {
  const MarkovTarget target = sample_markov_target(4, 8, 2);
  const ToyDraft model = make_draft(target, true, 2);
  const TokenSequence base = {1, 2, 3, 4, 5, 6};
  const SequenceLayout layout = inference_layout(6, 3);
  const RowMatrix ref = model.forward(layout, base, target.features(base));
  for (int j = 0; j < 6; ++j) {
    TokenSequence changed = base;
    for (int i = j; i < 6; ++i) changed[i] = (changed[i] + 3) % 8;
    const RowMatrix out = model.forward(layout, changed, target.features(changed));
    for (int s = 0; s < j; ++s) {
      EXPECT_TRUE(out.row(s).isApprox(ref.row(s), 0.0)) << "slot " << s << " j " << j;
    }
    EXPECT_FALSE(out.row(j).isApprox(ref.row(j), 1e-12));
  }
}

TEST(ToyDraftTest, RejectsMismatchedTarget) {
  const MarkovTarget target = sample_markov_target(4, 8, 1);
  const MarkovTarget other = sample_markov_target(4, 9, 1);
  const ToyDraft model = make_draft(target, true);
  EXPECT_THROW(model.predict(TokenSequence{1}, other, 2), Error);
  EXPECT_THROW(model.predict(TokenSequence{}, target, 2), Error);
  ToyDraftConfig bad;
  bad.vocab_size = 8;
  bad.num_heads = 5;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(ToyDraftTest, SaveLoadRoundTrip) {
  const MarkovTarget target = sample_markov_target(4, 8, 1);
  const ToyDraft model = make_draft(target, false, 9);
  const auto path = std::filesystem::temp_directory_path() / "pardraft_toy_roundtrip.bin";
  model.save(path);
  const ToyDraft loaded = ToyDraft::load(path);
  EXPECT_EQ(loaded.config(), model.config());
  EXPECT_TRUE(loaded.params() == model.params());
  EXPECT_TRUE(loaded.embedding().isApprox(model.embedding(), 0.0));
  const TokenSequence prefix = {4, 4, 1};
  EXPECT_EQ(loaded.predict(prefix, target, 3).values(), model.predict(prefix, target, 3).values());

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::filesystem::remove(path);
  auto code_of = [](const std::string& data) {
    std::istringstream in(data);
    try {
      ToyDraft::read(in);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInvalidConfig;
  };
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(code_of(bad), ErrorCode::kBadMagic);
  bad = bytes;
  bad[8] = 7;
  EXPECT_EQ(code_of(bad), ErrorCode::kVersionMismatch);
  EXPECT_EQ(code_of(bytes.substr(0, bytes.size() - 3)), ErrorCode::kTruncatedFile);
  EXPECT_EQ(code_of(bytes + "x"), ErrorCode::kCorruptFile);
  try {
    ToyDraft::load("/nonexistent/pardraft/model.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(ReferenceDrafterTest, OracleRowsFollowGreedyChain) {
  const MarkovTarget target = sample_markov_target(8, 16, 2);
  const TokenSequence prefix = {3, 9};
  const ParallelLogits logits = OracleDrafter().predict(prefix, target, 6);
  TokenSequence chain = prefix;
  for (int i = 0; i < 6; ++i) {
    const TokenId greedy = target.greedy_token(chain);
    EXPECT_EQ(argmax(logits.row(i)), greedy);
    chain.push_back(greedy);
  }
}

TEST(ReferenceDrafterTest, AdversarialPrefersLeastLikely) {
  const MarkovTarget target = sample_markov_target(8, 16, 1);
  const TokenSequence prefix = {3};
  const ParallelLogits logits = AdversarialDrafter().predict(prefix, target, 1);
  const auto q = target.distribution(prefix);
  EXPECT_EQ(argmax(logits.row(0)),
            std::min_element(q.begin(), q.end()) - q.begin());
}

TEST(ReferenceDrafterTest, UniformIsDeterministicPerPrefix) {
  const MarkovTarget target = sample_markov_target(8, 16, 1);
  const UniformDrafter u(3);
  EXPECT_EQ(u.predict(TokenSequence{1, 2}, target, 4).values(),
            u.predict(TokenSequence{1, 2}, target, 4).values());
  EXPECT_NE(u.predict(TokenSequence{1, 2}, target, 4).values(),
            u.predict(TokenSequence{1, 3}, target, 4).values());
}

TEST(ReferenceDrafterTest, MarginalsMatchBruteForce) {
  const MarkovTarget target = sample_markov_target(8, 5, 2);
  const TokenSequence prefix = {1, 4};
  const ParallelLogits logits = MarginalDrafter(target).predict(prefix, target, 3);
  // Enumerate all 5^3 continuations.
  std::vector<std::vector<double>> marg(3, std::vector<double>(5, 0.0));
  for (int a = 0; a < 5; ++a) {
    for (int b = 0; b < 5; ++b) {
      for (int c = 0; c < 5; ++c) {
        const double pa = target.distribution(prefix)[a];
        const double pb = target.distribution(TokenSequence{1, 4, a})[b];
        const double pc = target.distribution(TokenSequence{1, 4, a, b})[c];
        const double p = pa * pb * pc;
        marg[0][a] += p;
        marg[1][b] += p;
        marg[2][c] += p;
      }
    }
  }
  for (int t = 0; t < 3; ++t) {
    const auto probs = softmax(logits.row(t));
    for (int v = 0; v < 5; ++v) EXPECT_NEAR(probs[v], marg[t][v], 1e-8);
  }
}

TEST(ReferenceDrafterTest, OracleChainAcceptedEndToEnd) {
  const MarkovTarget target = sample_markov_target(8, 16, 2);
  const TokenSequence prefix = {3, 9};
  PruneConfig cfg;
  cfg.top_k = 2;
  cfg.beam_width = 32;
  cfg.max_nodes = 62;
  const int d = 5;
  const DraftTree tree = prune(OracleDrafter().predict(prefix, target, d), nullptr, cfg, prefix);
  // Every top-2 path is kept, the greedy chain among them.
  const LinearizedTree lin = linearize(tree, 2);
  std::mt19937_64 rng(0);
  const VerifyResult r = verify(tree, lin, prefix, target, 0.0, rng);
  TokenSequence chain = prefix;
  for (int i = 0; i < d; ++i) chain.push_back(target.greedy_token(chain));
  EXPECT_EQ(r.accepted, TokenSequence(chain.begin() + 2, chain.end()));
  EXPECT_EQ(r.bonus, target.greedy_token(chain));
}

}  // namespace
}  // namespace pardraft
