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

#include "pardraft/corpus.h"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace pardraft {

TokenSequence ByteTokenizer::encode(std::string_view text) {
  TokenSequence out;
  out.reserve(text.size());
  for (const char c : text) out.push_back(static_cast<unsigned char>(c));
  return out;
}

std::string ByteTokenizer::decode(std::span<const TokenId> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (const TokenId t : tokens) {
    if (t < 0 || t >= kVocabSize) {
      throw_error(ErrorCode::kOutOfVocabulary,
                  "token " + std::to_string(t) + " is not a byte");
    }
    out.push_back(static_cast<char>(t));
  }
  return out;
}

TokenSequence parse_token_list(std::string_view text,
                               const std::string& source) {
  TokenSequence out;
  std::size_t pos = 0;
  auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == ',';
  };
  while (pos < text.size()) {
    while (pos < text.size() && is_space(text[pos])) ++pos;
    if (pos == text.size()) break;
    std::size_t end = pos;
    while (end < text.size() && !is_space(text[end])) ++end;
    const std::string_view word = text.substr(pos, end - pos);
    TokenId value = 0;
    const auto [ptr, ec] =
        std::from_chars(word.data(), word.data() + word.size(), value);
    if (ec != std::errc() || ptr != word.data() + word.size() || value < 0) {
      throw_error(ErrorCode::kInvalidConfig,
                  source + ": invalid token '" + std::string(word) + "'");
    }
    out.push_back(value);
    pos = end;
  }
  return out;
}

std::vector<TokenSequence> read_corpus(std::istream& in, CorpusFormat format,
                                       const std::string& source) {
  std::vector<TokenSequence> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (format == CorpusFormat::kText) {
      corpus.push_back(ByteTokenizer::encode(line));
    } else {
      corpus.push_back(
          parse_token_list(line, source + ":" + std::to_string(line_no)));
    }
  }
  if (in.bad()) throw_error(ErrorCode::kIo, source + ": read failed");
  return corpus;
}

std::vector<TokenSequence> load_corpus(const std::filesystem::path& path,
                                       CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorCode::kIo, "cannot open corpus " + path.string());
  return read_corpus(in, format, path.string());
}

void write_token_corpus(std::ostream& out,
                        std::span<const TokenSequence> corpus) {
  for (const auto& seq : corpus) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i > 0) out << ' ';
      out << seq[i];
    }
    out << '\n';
  }
}

}  // namespace pardraft
