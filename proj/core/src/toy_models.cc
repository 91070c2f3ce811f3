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

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_map>

#include "binary_io.h"

namespace pardraft {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void fill_normal(Eigen::Ref<Eigen::MatrixXd> m, double stddev,
                 std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = normal(rng);
  }
}

std::vector<double> log_floor(const std::vector<double>& p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::log(std::max(p[i], 1e-300));
  return out;
}

}  // namespace

std::uint64_t hash_tokens(std::uint64_t seed, std::span<const TokenId> tokens) {
  std::uint64_t h = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
  for (const TokenId t : tokens) h = splitmix64(h ^ static_cast<std::uint32_t>(t));
  return h;
}

// ---------------------------------------------------------------------------
// MarkovTarget

MarkovTarget::MarkovTarget(const MarkovTargetSpec& spec) : spec_(spec) {
  if (spec.vocab_size < 2 || spec.order < 1) {
    throw_error(ErrorCode::kInvalidConfig, "Markov target needs V >= 2 and order >= 1");
  }
  if (!(spec.sharpness > 0.0)) {
    throw_error(ErrorCode::kInvalidConfig, "Markov target sharpness must be > 0");
  }
  const double contexts = std::pow(static_cast<double>(spec.vocab_size), spec.order);
  if (contexts > static_cast<double>(1 << 22)) {
    throw_error(ErrorCode::kInvalidConfig, "V^order exceeds 2^22 contexts");
  }
  num_contexts_ = static_cast<std::size_t>(contexts);
  const int vocab = spec.vocab_size;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  table_.resize(num_contexts_ * vocab);
  for (std::size_t c = 0; c < num_contexts_; ++c) {
    double* row = table_.data() + c * vocab;
    double max_logit = -INFINITY;
    for (int v = 0; v < vocab; ++v) {
      row[v] = spec.sharpness * normal(rng);
      max_logit = std::max(max_logit, row[v]);
    }
    double sum = 0.0;
    for (int v = 0; v < vocab; ++v) {
      row[v] = std::exp(row[v] - max_logit);
      sum += row[v];
    }
    for (int v = 0; v < vocab; ++v) row[v] /= sum;
  }

  embedding_.resize(vocab, kEmbedDim);
  fill_normal(embedding_, 1.0 / std::sqrt(static_cast<double>(kEmbedDim)), rng);

  Eigen::MatrixXd readout(kFeatureWidth, vocab), mixer(kFeatureWidth, vocab);
  fill_normal(readout, 1.0, rng);
  fill_normal(mixer, 2.0, rng);
  feature_table_.resize(static_cast<Eigen::Index>(num_contexts_), 3 * kFeatureWidth);
  for (std::size_t c = 0; c < num_contexts_; ++c) {
    const Eigen::Map<const Eigen::VectorXd> q(table_.data() + c * vocab, vocab);
    Eigen::VectorXd hashed(kFeatureWidth);
    std::mt19937_64 ctx_rng(splitmix64(spec.seed ^ (c * 0x9e3779b97f4a7c15ULL)));
    for (int i = 0; i < kFeatureWidth; ++i) hashed(i) = 0.5 * normal(ctx_rng);
    const Eigen::VectorXd high = readout * q;
    const Eigen::VectorXd low = (mixer * q + hashed).array().tanh().matrix();
    const auto r = static_cast<Eigen::Index>(c);
    feature_table_.row(r).segment(0, kFeatureWidth) = high.transpose();
    feature_table_.row(r).segment(kFeatureWidth, kFeatureWidth) = hashed.transpose();
    feature_table_.row(r).segment(2 * kFeatureWidth, kFeatureWidth) = low.transpose();
  }
}

MarkovTarget sample_markov_target(std::uint64_t seed, int vocab_size, int order,
                                  double sharpness) {
  return MarkovTarget({seed, vocab_size, order, sharpness});
}

std::size_t MarkovTarget::context_id(std::span<const TokenId> prefix) const {
  const auto k = static_cast<std::size_t>(spec_.order);
  std::size_t id = 0;
  for (std::size_t i = 0; i < k; ++i) {
    // Position i of the padded window [pad..., prefix tail].
    const std::ptrdiff_t src =
        static_cast<std::ptrdiff_t>(prefix.size()) - static_cast<std::ptrdiff_t>(k - i);
    TokenId t = 0;
    if (src >= 0) {
      t = prefix[static_cast<std::size_t>(src)];
      if (t < 0 || t >= spec_.vocab_size) {
        throw_error(ErrorCode::kOutOfVocabulary,
                    "token " + std::to_string(t) + " outside Markov vocab");
      }
    }
    id = id * spec_.vocab_size + static_cast<std::size_t>(t);
  }
  return id;
}

std::size_t MarkovTarget::next_context(std::size_t ctx, TokenId token) const {
  return (ctx * spec_.vocab_size + static_cast<std::size_t>(token)) % num_contexts_;
}

std::vector<double> MarkovTarget::distribution(std::span<const TokenId> prefix) const {
  const auto r = row(context_id(prefix));
  return {r.begin(), r.end()};
}

Eigen::MatrixXd MarkovTarget::features(std::span<const TokenId> tokens) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(tokens.size()), feature_dim());
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(context_id(tokens.first(j)));
    out.row(static_cast<Eigen::Index>(j)) = feature_table_.row(c);
  }
  return out;
}

std::vector<TokenSequence> MarkovTarget::sample_corpus(int num_sequences, int length,
                                                       std::uint64_t seed,
                                                       double temperature) const {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<TokenId> uniform(0, spec_.vocab_size - 1);
  std::vector<TokenSequence> corpus(static_cast<std::size_t>(std::max(num_sequences, 0)));
  for (auto& seq : corpus) {
    for (int i = 0; i < length; ++i) {
      if (i < spec_.order) {
        seq.push_back(uniform(rng));
        continue;
      }
      const auto q = apply_temperature(row(context_id(seq)), temperature);
      seq.push_back(temperature == 0.0 ? argmax(q) : sample_index(q, rng));
    }
  }
  return corpus;
}

double MarkovTarget::greedy_accuracy_ceiling() const {
  std::vector<double> pi(num_contexts_, 1.0 / static_cast<double>(num_contexts_));
  std::vector<double> next(num_contexts_);
  for (int iter = 0; iter < 2000; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t c = 0; c < num_contexts_; ++c) {
      const auto q = row(c);
      for (int v = 0; v < spec_.vocab_size; ++v) next[next_context(c, v)] += pi[c] * q[v];
    }
    double delta = 0.0;
    for (std::size_t c = 0; c < num_contexts_; ++c) delta += std::abs(next[c] - pi[c]);
    pi.swap(next);
    if (delta < 1e-13) break;
  }
  double ceiling = 0.0;
  for (std::size_t c = 0; c < num_contexts_; ++c) {
    const auto q = row(c);
    ceiling += pi[c] * *std::max_element(q.begin(), q.end());
  }
  return ceiling;
}

// ---------------------------------------------------------------------------
// ToyDraft

void ToyDraftConfig::validate() const {
  if (vocab_size < 2 || feature_dim < 1 || proj_dim < 1 || embed_dim < 1 || num_heads < 1) {
    throw_error(ErrorCode::kInvalidConfig, "toy draft dimensions must be positive");
  }
  if (model_dim() % num_heads != 0 || head_dim() % 2 != 0) {
    throw_error(ErrorCode::kInvalidConfig, "head width must divide the model width and be even");
  }
  if (!(rope_base > 1.0)) throw_error(ErrorCode::kInvalidConfig, "rope_base must be > 1");
}

ToyDraftParams ToyDraftParams::zeros(const ToyDraftConfig& cfg) {
  const int d = cfg.model_dim();
  ToyDraftParams p;
  p.fc_w = Eigen::MatrixXd::Zero(cfg.proj_dim, cfg.feature_dim);
  p.fc_b = Eigen::VectorXd::Zero(cfg.proj_dim);
  p.mask_emb = Eigen::VectorXd::Zero(d);
  p.wq = Eigen::MatrixXd::Zero(d, d);
  p.wk = Eigen::MatrixXd::Zero(d, d);
  p.wv = Eigen::MatrixXd::Zero(d, d);
  p.wo = Eigen::MatrixXd::Zero(d, d);
  p.head_w = Eigen::MatrixXd::Zero(cfg.vocab_size, d);
  p.head_b = Eigen::VectorXd::Zero(cfg.vocab_size);
  return p;
}

std::vector<std::span<double>> ToyDraftParams::tensors() {
  auto view = [](auto& m) {
    return std::span<double>(m.data(), static_cast<std::size_t>(m.size()));
  };
  return {view(fc_w), view(fc_b), view(mask_emb), view(wq), view(wk),
          view(wv),   view(wo),   view(head_w),   view(head_b)};
}

std::vector<std::span<const double>> ToyDraftParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& t : const_cast<ToyDraftParams*>(this)->tensors()) out.emplace_back(t);
  return out;
}

std::size_t ToyDraftParams::size() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

bool ToyDraftParams::operator==(const ToyDraftParams& other) const {
  const auto a = tensors();
  const auto b = other.tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::equal(a[i].begin(), a[i].end(), b[i].begin(), b[i].end())) return false;
  }
  return true;
}

SequenceLayout inference_layout(int prefix_len, int num_masks) {
  SequenceLayout layout;
  const int n = prefix_len + num_masks;
  layout.source.resize(n);
  layout.position_ids.resize(n);
  layout.visible.resize(n);
  for (int s = 0; s < n; ++s) {
    layout.source[s] = s < prefix_len ? s : kMaskSlot;
    layout.position_ids[s] = s;
    layout.visible[s].resize(s + 1);
    for (int k = 0; k <= s; ++k) layout.visible[s][k] = k;
  }
  return layout;
}

ToyDraft::ToyDraft(const ToyDraftConfig& cfg, Eigen::MatrixXd embedding,
                   std::uint64_t seed)
    : cfg_(cfg), embedding_(std::move(embedding)) {
  cfg_.validate();
  if (embedding_.rows() != cfg_.vocab_size || embedding_.cols() != cfg_.embed_dim) {
    throw_error(ErrorCode::kShapeMismatch, "embedding table must be V x embed_dim");
  }
  params_ = ToyDraftParams::zeros(cfg_);
  std::mt19937_64 rng(seed);
  const double d = cfg_.model_dim();
  fill_normal(params_.fc_w, 1.0 / std::sqrt(static_cast<double>(cfg_.feature_dim)), rng);
  fill_normal(params_.mask_emb, 1.0 / std::sqrt(d), rng);
  fill_normal(params_.wq, 1.0 / std::sqrt(d), rng);
  fill_normal(params_.wk, 1.0 / std::sqrt(d), rng);
  fill_normal(params_.wv, 1.0 / std::sqrt(d), rng);
  fill_normal(params_.wo, 1.0 / std::sqrt(d), rng);
  fill_normal(params_.head_w, 1.0 / std::sqrt(d), rng);
}

ToyDraft::ToyDraft(const ToyDraft& other)
    : DraftPredictor(other),
      cfg_(other.cfg_),
      embedding_(other.embedding_),
      params_(other.params_),
      attention_calls_(other.attention_calls()) {}

ToyDraft& ToyDraft::operator=(const ToyDraft& other) {
  if (this != &other) {
    cfg_ = other.cfg_;
    embedding_ = other.embedding_;
    params_ = other.params_;
    attention_calls_.store(other.attention_calls());
  }
  return *this;
}

void ToyDraft::rotate(RowMatrix& m, std::span<const int> positions, bool inverse) const {
  const int heads = cfg_.num_heads;
  const int hd = cfg_.head_dim();
  for (Eigen::Index s = 0; s < m.rows(); ++s) {
    const double pos = positions[static_cast<std::size_t>(s)];
    for (int i = 0; i < hd / 2; ++i) {
      const double angle = pos * std::pow(cfg_.rope_base, -2.0 * i / hd);
      const double c = std::cos(angle);
      const double sn = inverse ? -std::sin(angle) : std::sin(angle);
      for (int h = 0; h < heads; ++h) {
        const Eigen::Index a = h * hd + 2 * i;
        const double x = m(s, a);
        const double y = m(s, a + 1);
        m(s, a) = x * c - y * sn;
        m(s, a + 1) = x * sn + y * c;
      }
    }
  }
}

RowMatrix ToyDraft::forward(const SequenceLayout& layout, std::span<const TokenId> tokens,
                            const Eigen::MatrixXd& features, ForwardCache* cache) const {
  const auto slots = static_cast<Eigen::Index>(layout.size());
  const int dim = cfg_.model_dim();
  const int heads = cfg_.num_heads;
  const int hd = cfg_.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;
  c.x.resize(slots, dim);
  for (Eigen::Index s = 0; s < slots; ++s) {
    const int src = layout.source[static_cast<std::size_t>(s)];
    if (src == kMaskSlot) {
      c.x.row(s) = params_.mask_emb.transpose();
      continue;
    }
    const TokenId tok = tokens[static_cast<std::size_t>(src)];
    if (tok < 0 || tok >= cfg_.vocab_size) {
      throw_error(ErrorCode::kOutOfVocabulary, "draft input token " + std::to_string(tok));
    }
    c.x.row(s).head(cfg_.proj_dim) =
        (params_.fc_w * features.row(src).transpose() + params_.fc_b).transpose();
    c.x.row(s).tail(cfg_.embed_dim) = embedding_.row(tok);
  }
  c.q = c.x * params_.wq.transpose();
  c.k = c.x * params_.wk.transpose();
  c.v = c.x * params_.wv.transpose();
  rotate(c.q, layout.position_ids, false);
  rotate(c.k, layout.position_ids, false);

  c.attn_out = RowMatrix::Zero(slots, dim);
  c.attn.assign(static_cast<std::size_t>(slots) * heads, {});
  for (Eigen::Index s = 0; s < slots; ++s) {
    const auto& vis = layout.visible[static_cast<std::size_t>(s)];
    for (int h = 0; h < heads; ++h) {
      auto& w = c.attn[static_cast<std::size_t>(s) * heads + h];
      w.resize(vis.size());
      double max_score = -INFINITY;
      for (std::size_t i = 0; i < vis.size(); ++i) {
        w[i] = scale * c.q.row(s).segment(h * hd, hd).dot(c.k.row(vis[i]).segment(h * hd, hd));
        max_score = std::max(max_score, w[i]);
      }
      double sum = 0.0;
      for (double& x : w) {
        x = std::exp(x - max_score);
        sum += x;
      }
      for (std::size_t i = 0; i < vis.size(); ++i) {
        w[i] /= sum;
        c.attn_out.row(s).segment(h * hd, hd) += w[i] * c.v.row(vis[i]).segment(h * hd, hd);
      }
    }
  }
  c.hidden = c.x + c.attn_out * params_.wo.transpose();
  RowMatrix logits = c.hidden * params_.head_w.transpose();
  logits.rowwise() += params_.head_b.transpose();
  return logits;
}

void ToyDraft::backward(const SequenceLayout& layout, const ForwardCache& c,
                        const Eigen::MatrixXd& features, const RowMatrix& dlogits,
                        ToyDraftParams& grad) const {
  const auto slots = static_cast<Eigen::Index>(layout.size());
  const int heads = cfg_.num_heads;
  const int hd = cfg_.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  grad.head_w.noalias() += dlogits.transpose() * c.hidden;
  grad.head_b += dlogits.colwise().sum().transpose();
  const RowMatrix dhidden = dlogits * params_.head_w;
  RowMatrix dx = dhidden;
  grad.wo.noalias() += dhidden.transpose() * c.attn_out;
  const RowMatrix dattn = dhidden * params_.wo;

  RowMatrix dq = RowMatrix::Zero(slots, c.q.cols());
  RowMatrix dk = RowMatrix::Zero(slots, c.k.cols());
  RowMatrix dv = RowMatrix::Zero(slots, c.v.cols());
  std::vector<double> da;
  for (Eigen::Index s = 0; s < slots; ++s) {
    const auto& vis = layout.visible[static_cast<std::size_t>(s)];
    for (int h = 0; h < heads; ++h) {
      const auto& w = c.attn[static_cast<std::size_t>(s) * heads + h];
      const auto dout = dattn.row(s).segment(h * hd, hd);
      da.resize(vis.size());
      double dot = 0.0;
      for (std::size_t i = 0; i < vis.size(); ++i) {
        da[i] = dout.dot(c.v.row(vis[i]).segment(h * hd, hd));
        dv.row(vis[i]).segment(h * hd, hd) += w[i] * dout;
        dot += w[i] * da[i];
      }
      for (std::size_t i = 0; i < vis.size(); ++i) {
        const double ds = w[i] * (da[i] - dot) * scale;
        dq.row(s).segment(h * hd, hd) += ds * c.k.row(vis[i]).segment(h * hd, hd);
        dk.row(vis[i]).segment(h * hd, hd) += ds * c.q.row(s).segment(h * hd, hd);
      }
    }
  }
  rotate(dq, layout.position_ids, true);
  rotate(dk, layout.position_ids, true);

  grad.wq.noalias() += dq.transpose() * c.x;
  grad.wk.noalias() += dk.transpose() * c.x;
  grad.wv.noalias() += dv.transpose() * c.x;
  dx.noalias() += dq * params_.wq;
  dx.noalias() += dk * params_.wk;
  dx.noalias() += dv * params_.wv;

  for (Eigen::Index s = 0; s < slots; ++s) {
    const int src = layout.source[static_cast<std::size_t>(s)];
    if (src == kMaskSlot) {
      grad.mask_emb += dx.row(s).transpose();
      continue;
    }
    // The embedding half of the slot is frozen.
    const Eigen::VectorXd dg = dx.row(s).head(cfg_.proj_dim).transpose();
    grad.fc_w.noalias() += dg * features.row(src);
    grad.fc_b += dg;
  }
}

std::vector<int> ToyDraft::read_slots(int prefix_len, int draft_len) const {
  std::vector<int> rows(static_cast<std::size_t>(draft_len));
  const int first = cfg_.shifted ? prefix_len - 1 : prefix_len;
  for (int t = 0; t < draft_len; ++t) rows[t] = first + t;
  return rows;
}

ParallelLogits ToyDraft::predict(std::span<const TokenId> prefix, const TargetModel& target,
                                 int draft_len) const {
  if (prefix.empty() || draft_len < 1) {
    throw_error(ErrorCode::kShapeMismatch, "toy draft needs a prefix and d >= 1");
  }
  if (target.vocab_size() != cfg_.vocab_size || target.feature_dim() != cfg_.feature_dim) {
    throw_error(ErrorCode::kShapeMismatch, "target does not match the draft's V / feature width");
  }
  const int n = static_cast<int>(prefix.size());
  const Eigen::MatrixXd feats = target.features(prefix);
  const SequenceLayout layout = inference_layout(n, num_masks(draft_len));
  const RowMatrix logits = forward(layout, prefix, feats);
  attention_calls_.fetch_add(1, std::memory_order_relaxed);

  ParallelLogits out(draft_len, cfg_.vocab_size);
  const auto rows = read_slots(n, draft_len);
  for (int t = 0; t < draft_len; ++t) {
    auto dst = out.row(t);
    for (int v = 0; v < cfg_.vocab_size; ++v) dst[v] = logits(rows[t], v);
  }
  return out;
}

namespace {
constexpr std::array<char, 8> kToyMagic = {'P', 'D', 'T', 'O', 'Y', 'D', 'R', '\0'};
constexpr std::uint32_t kToyVersion = 1;
}  // namespace

void ToyDraft::write(std::ostream& out) const {
  using namespace binary_io;
  out.write(kToyMagic.data(), kToyMagic.size());
  put_u32(out, kToyVersion);
  put_u32(out, static_cast<std::uint32_t>(cfg_.vocab_size));
  put_u32(out, static_cast<std::uint32_t>(cfg_.feature_dim));
  put_u32(out, static_cast<std::uint32_t>(cfg_.proj_dim));
  put_u32(out, static_cast<std::uint32_t>(cfg_.embed_dim));
  put_u32(out, static_cast<std::uint32_t>(cfg_.num_heads));
  put_f64(out, cfg_.rope_base);
  put_u32(out, cfg_.shifted ? 1u : 0u);
  for (Eigen::Index i = 0; i < embedding_.size(); ++i) put_f64(out, embedding_.data()[i]);
  for (const auto& t : params_.tensors()) {
    for (const double v : t) put_f64(out, v);
  }
  if (!out) throw_error(ErrorCode::kIo, "failed writing toy draft model");
}

ToyDraft ToyDraft::read(std::istream& in) {
  binary_io::Reader r(in, "toy draft model");
  std::array<char, 8> magic{};
  for (auto& c : magic) c = static_cast<char>(r.byte());
  if (magic != kToyMagic) throw_error(ErrorCode::kBadMagic, "not a toy draft model file");
  const std::uint32_t version = r.u32();
  if (version != kToyVersion) {
    throw_error(ErrorCode::kVersionMismatch,
                "toy model version " + std::to_string(version) + ", expected " +
                    std::to_string(kToyVersion));
  }
  ToyDraft model;
  auto& cfg = model.cfg_;
  cfg.vocab_size = static_cast<int>(r.u32());
  cfg.feature_dim = static_cast<int>(r.u32());
  cfg.proj_dim = static_cast<int>(r.u32());
  cfg.embed_dim = static_cast<int>(r.u32());
  cfg.num_heads = static_cast<int>(r.u32());
  cfg.rope_base = r.f64();
  cfg.shifted = r.u32() != 0;
  if (cfg.vocab_size > (1 << 24) || cfg.feature_dim > 4096 || cfg.proj_dim > 4096 ||
      cfg.embed_dim > 4096) {
    throw_error(ErrorCode::kCorruptFile, "implausible toy model dimensions");
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw_error(ErrorCode::kCorruptFile, e.what());
  }
  model.embedding_.resize(cfg.vocab_size, cfg.embed_dim);
  for (Eigen::Index i = 0; i < model.embedding_.size(); ++i) model.embedding_.data()[i] = r.f64();
  model.params_ = ToyDraftParams::zeros(cfg);
  for (auto& t : model.params_.tensors()) {
    for (double& v : t) v = r.f64();
  }
  if (!r.at_end()) throw_error(ErrorCode::kCorruptFile, "trailing bytes after toy model");
  return model;
}

void ToyDraft::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write(out);
}

ToyDraft ToyDraft::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorCode::kIo, "cannot open " + path.string());
  return read(in);
}

// ---------------------------------------------------------------------------
// Reference drafters

ParallelLogits OracleDrafter::predict(std::span<const TokenId> prefix,
                                      const TargetModel& target, int draft_len) const {
  ParallelLogits out(draft_len, target.vocab_size());
  TokenSequence chain(prefix.begin(), prefix.end());
  for (int t = 0; t < draft_len; ++t) {
    const auto q = target.distribution(chain);
    const auto rowp = temperature_ > 0.0 ? apply_temperature(q, temperature_) : q;
    const auto logq = log_floor(rowp);
    std::copy(logq.begin(), logq.end(), out.row(t).begin());
    chain.push_back(argmax(q));
  }
  return out;
}

ParallelLogits AdversarialDrafter::predict(std::span<const TokenId> prefix,
                                           const TargetModel& target, int draft_len) const {
  ParallelLogits out(draft_len, target.vocab_size());
  TokenSequence chain(prefix.begin(), prefix.end());
  for (int t = 0; t < draft_len; ++t) {
    const auto q = target.distribution(chain);
    const auto logq = log_floor(q);
    auto row = out.row(t);
    for (std::size_t v = 0; v < logq.size(); ++v) row[v] = -logq[v];
    chain.push_back(argmax(q));
  }
  return out;
}

ParallelLogits UniformDrafter::predict(std::span<const TokenId> prefix,
                                       const TargetModel& target, int draft_len) const {
  ParallelLogits out(draft_len, target.vocab_size());
  std::mt19937_64 rng(hash_tokens(seed_, prefix));
  std::normal_distribution<double> normal(0.0, scale_);
  for (int t = 0; t < draft_len; ++t) {
    for (double& x : out.row(t)) x = normal(rng);
  }
  return out;
}

ParallelLogits MarginalDrafter::predict(std::span<const TokenId> prefix,
                                        const TargetModel& target, int draft_len) const {
  if (target.vocab_size() != target_.vocab_size()) {
    throw_error(ErrorCode::kShapeMismatch, "marginal drafter built for another vocab");
  }
  const int vocab = target_.vocab_size();
  ParallelLogits out(draft_len, vocab);
  std::unordered_map<std::size_t, double> states = {{target_.context_id(prefix), 1.0}};
  std::vector<double> marginal(vocab);
  for (int t = 0; t < draft_len; ++t) {
    std::fill(marginal.begin(), marginal.end(), 0.0);
    std::unordered_map<std::size_t, double> next;
    for (const auto& [ctx, mass] : states) {
      const auto q = target_.row(ctx);
      for (int v = 0; v < vocab; ++v) {
        marginal[v] += mass * q[v];
        next[target_.next_context(ctx, v)] += mass * q[v];
      }
    }
    states.swap(next);
    const auto logm = log_floor(marginal);
    std::copy(logm.begin(), logm.end(), out.row(t).begin());
  }
  return out;
}

ParallelLogits NoisyDrafter::predict(std::span<const TokenId> prefix,
                                     const TargetModel& target, int draft_len) const {
  ParallelLogits out = base_.predict(prefix, target, draft_len);
  std::mt19937_64 rng(hash_tokens(seed_, prefix));
  std::normal_distribution<double> normal(0.0, noise_);
  for (int t = 0; t < draft_len; ++t) {
    for (double& x : out.row(t)) x += normal(rng);
  }
  return out;
}

}  // namespace pardraft
