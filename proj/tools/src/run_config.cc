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

#include "run_config.h"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pardraft::tools {

namespace {

using nlohmann::json;
using FieldMap = std::map<std::string, std::function<void(const json&)>>;

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  throw_error(ErrorCode::kInvalidConfig, where + ": " + what);
}

void apply_fields(const json& obj, const std::string& where, const FieldMap& fields) {
  if (!obj.is_object()) config_error(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) config_error(where, "unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      config_error(where + "." + key, e.what());
    }
  }
}

template <typename T>
std::function<void(const json&)> set(T& target) {
  return [&target](const json& v) { target = v.get<T>(); };
}

std::function<void(const json&)> set_path(std::optional<std::filesystem::path>& target,
                                          const std::filesystem::path& base) {
  return [&target, base](const json& v) {
    std::filesystem::path p = v.get<std::string>();
    target = p.is_relative() && !base.empty() ? base / p : p;
  };
}

std::function<void(const json&)> set_data(DataConfig& data, const std::string& where) {
  return [&data, where](const json& v) {
    apply_fields(v, where, {{"num_sequences", set(data.num_sequences)},
                            {"sequence_length", set(data.sequence_length)},
                            {"seed", set(data.seed)},
                            {"temperature", set(data.temperature)}});
  };
}

}  // namespace

RunConfig default_run_config() {
  RunConfig cfg;
  // Wide enough for the default top_k of 25.
  cfg.target.vocab_size = 32;
  cfg.train.train.kl.gamma = 0.6;
  cfg.train.train.kl.draft_len = cfg.decode.draft_len;
  cfg.train.draft.vocab_size = cfg.target.vocab_size;
  return cfg;
}

void RunConfig::validate() const {
  if (target.vocab_size < 2 || target.order < 1 || !(target.sharpness > 0.0)) {
    config_error("target", "need vocab_size >= 2, order >= 1, sharpness > 0");
  }
  decode.validate();
  train.train.kl.validate();
  train.draft.validate();
  if (train.draft.vocab_size != target.vocab_size) {
    config_error("train", "draft vocab differs from target vocab");
  }
  if (train.train.kl.draft_len != decode.draft_len) {
    config_error("train", "draft_len must match decode.draft_len");
  }
  if (train.train.steps < 0 || !(train.train.learning_rate > 0.0)) {
    config_error("train", "need steps >= 0 and learning_rate > 0");
  }
  for (const DataConfig* data : {&train.data, &eval.data}) {
    if (data->num_sequences < 0 || data->sequence_length < 1 || !(data->temperature >= 0.0)) {
      config_error("data", "need num_sequences >= 0, sequence_length >= 1 and temperature >= 0");
    }
  }
  if (eval.min_prefix < 1 || eval.decode_prompts < 0) {
    config_error("eval", "need min_prefix >= 1 and decode_prompts >= 0");
  }
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir,
                           const std::string& source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    config_error(source, e.what());
  }
  RunConfig cfg = default_run_config();
  std::optional<int> draft_len;
  std::optional<std::string> optimizer;
  auto& tc = cfg.train.train;
  apply_fields(doc, source, {
    {"seed", set(cfg.seed)},
    {"target", [&](const json& v) {
       apply_fields(v, "target", {{"seed", set(cfg.target.seed)},
                                  {"vocab_size", set(cfg.target.vocab_size)},
                                  {"order", set(cfg.target.order)},
                                  {"sharpness", set(cfg.target.sharpness)}});
     }},
    {"prune", [&](const json& v) {
       auto& p = cfg.prune;
       apply_fields(v, "prune", {{"top_k", set(p.top_k)},
                                 {"beam_width", set(p.beam_width)},
                                 {"max_nodes", set(p.max_nodes)},
                                 {"ngram_weight", set(p.ngram_weight)},
                                 {"logit_decay", set(p.logit_decay)},
                                 {"level_exponent", set(p.level_exponent)},
                                 {"epsilon", set(p.epsilon)}});
     }},
    {"decode", [&](const json& v) {
       auto& d = cfg.decode;
       apply_fields(v, "decode", {{"draft_len", [&](const json& x) { draft_len = x.get<int>(); }},
                                  {"temperature", set(d.temperature)},
                                  {"max_tokens", set(d.max_tokens)},
                                  {"eos_token", set(d.eos_token)},
                                  {"prune_workers", set(d.prune_workers)}});
     }},
    {"train", [&](const json& v) {
       auto& dc = cfg.train.draft;
       apply_fields(v, "train", {
         {"gamma", set(tc.kl.gamma)},
         {"steps", set(tc.steps)},
         {"optimizer", [&](const json& x) { optimizer = x.get<std::string>(); }},
         {"learning_rate", set(tc.learning_rate)},
         {"log_every", set(tc.log_every)},
         {"shifted", set(dc.shifted)},
         {"proj_dim", set(dc.proj_dim)},
         {"num_heads", set(dc.num_heads)},
         {"rope_base", set(dc.rope_base)},
         {"data", set_data(cfg.train.data, "train.data")}});
     }},
    {"eval", [&](const json& v) {
       apply_fields(v, "eval", {{"min_prefix", set(cfg.eval.min_prefix)},
                                {"decode_prompts", set(cfg.eval.decode_prompts)},
                                {"data", set_data(cfg.eval.data, "eval.data")}});
     }},
    {"paths", [&](const json& v) {
       auto& p = cfg.paths;
       apply_fields(v, "paths", {{"trie", set_path(p.trie, base_dir)},
                                 {"model", set_path(p.model, base_dir)},
                                 {"corpus", set_path(p.corpus, base_dir)},
                                 {"log", set_path(p.log, base_dir)}});
     }},
  });
  if (draft_len) cfg.decode.draft_len = *draft_len;
  if (optimizer) {
    if (*optimizer == "sgd") {
      tc.optimizer = Optimizer::kGradientDescent;
    } else if (*optimizer == "adam") {
      tc.optimizer = Optimizer::kAdam;
    } else {
      config_error("train.optimizer", "expected \"sgd\" or \"adam\", got \"" + *optimizer + "\"");
    }
  }
  cfg.decode.prune = cfg.prune;
  cfg.decode.seed = cfg.seed;
  tc.seed = cfg.seed;
  tc.kl.draft_len = cfg.decode.draft_len;
  cfg.train.draft.vocab_size = cfg.target.vocab_size;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorCode::kIo, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path(), path.string());
}

void require_existing(const RunConfig& cfg, std::initializer_list<PathRole> roles) {
  for (const PathRole role : roles) {
    const std::optional<std::filesystem::path>* p = nullptr;
    const char* name = "";
    switch (role) {
      case PathRole::kTrie: p = &cfg.paths.trie; name = "paths.trie"; break;
      case PathRole::kModel: p = &cfg.paths.model; name = "paths.model"; break;
      case PathRole::kCorpus: p = &cfg.paths.corpus; name = "paths.corpus"; break;
    }
    if (p->has_value() && !std::filesystem::exists(**p)) {
      throw_error(ErrorCode::kIo, std::string(name) + " does not exist: " + (*p)->string());
    }
  }
}

}  // namespace pardraft::tools
