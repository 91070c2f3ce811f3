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

#ifndef PARDRAFT_CORPUS_H_
#define PARDRAFT_CORPUS_H_

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pardraft/common.h"

namespace pardraft {

// Byte-level tokenizer used for plain-text demo corpora: token = byte value.
struct ByteTokenizer {
  static constexpr int kVocabSize = 256;

  static TokenSequence encode(std::string_view text);
  static std::string decode(std::span<const TokenId> tokens);
};

enum class CorpusFormat {
  // One record per line, whitespace-separated integer token IDs.
  kTokenIds,
  // One record per line, encoded with ByteTokenizer.
  kText,
};

// `source` names the input in error messages ("<source>:<line>: ...").
std::vector<TokenSequence> read_corpus(std::istream& in, CorpusFormat format,
                                       const std::string& source = "<stream>");
std::vector<TokenSequence> load_corpus(const std::filesystem::path& path,
                                       CorpusFormat format);

void write_token_corpus(std::ostream& out,
                        std::span<const TokenSequence> corpus);

// Parses "3 1 4 1 5" style token lists.
TokenSequence parse_token_list(std::string_view text,
                               const std::string& source = "<input>");

}  // namespace pardraft

#endif  // PARDRAFT_CORPUS_H_
