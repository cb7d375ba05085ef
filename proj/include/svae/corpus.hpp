/* Copyright 2026 The svae Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Tokenization, vocabulary, pretrained word vectors, and the training and
// evaluation file formats.

#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "svae/errors.hpp"
#include "svae/rng.hpp"
#include "svae/tensor.hpp"

namespace svae {

using TokenId = std::uint32_t;
using TokenIds = std::vector<TokenId>;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kStartId = 2;
inline constexpr TokenId kEndId = 3;
inline constexpr std::size_t kReservedCount = 4;
inline constexpr std::size_t kDefaultMaxLen = 30;

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline bool is_split_punct(char c) {
  switch (c) {
    case '.': case ',': case '!': case '?': case ';': case ':': case '"': case '\'': case '(': case ')':
      return true;
    default:
      return false;
  }
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::size_t> parse_count(std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

// getline without the trailing '\r' of CRLF files.
inline bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace detail

// Lowercases ASCII, splits on whitespace, and emits each of . , ! ? ; : " ' ( )
// as its own token.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (detail::is_space(c)) {
      flush();
    } else if (detail::is_split_punct(c)) {
      flush();
      tokens.emplace_back(1, c);
    } else {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    }
  }
  flush();
  return tokens;
}

class Vocabulary {
 public:
  Vocabulary() {
    for (const char* t : {"<pad>", "<unk>", "<s>", "</s>"}) add(t);
  }

  // Returns the existing id when the token is already present.
  TokenId add(const std::string& token) {
    auto [it, inserted] = index_.emplace(token, static_cast<TokenId>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  std::optional<TokenId> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view token) const { return find(token).has_value(); }

  // Exact match, then lowercase, then UNK.
  TokenId lookup(std::string_view token) const {
    if (auto id = find(token)) return *id;
    if (auto id = find(detail::ascii_lower(token))) return *id;
    return kUnkId;
  }

  const std::string& token(TokenId id) const {
    if (id >= tokens_.size()) {
      throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(tokens_.size()));
    }
    return tokens_[id];
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // FNV-1a over the id-ordered token listing.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char b) {
      h ^= b;
      h *= 0x100000001b3ULL;
    };
    for (const std::string& t : tokens_) {
      for (char c : t) mix(static_cast<unsigned char>(c));
      mix(0);
    }
    return h;
  }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Frozen word vectors, one row per vocabulary id. Rows for <s> and </s> are
// the initial values of the trainable start/end embeddings.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(Tensor matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rank() != 2) throw DimensionError("embedding table must be a matrix");
  }

  std::size_t rows() const { return matrix_.rows(); }
  std::size_t dim() const { return matrix_.cols(); }
  std::span<const double> row(TokenId id) const {
    if (id >= rows()) {
      throw VocabularyError("token id " + std::to_string(id) + " outside embedding table of " +
                            std::to_string(rows()) + " rows");
    }
    return matrix_.row(id);
  }
  const Tensor& matrix() const { return matrix_; }
  Tensor& matrix() { return matrix_; }

 private:
  Tensor matrix_;
};

struct PretrainedEmbeddings {
  Vocabulary vocab;
  EmbeddingTable table;
  std::vector<std::string> warnings;
};

/**
 * Reads word2vec text format: a "<count> <dim>" header, then one
 * "<token> <dim floats>" line per word. Reserved rows are prepended: <pad>
 * is zero, <unk> is the mean of the loaded rows, <s> and </s> are drawn from
 * `seed`. With `vocab_limit`, only the first `vocab_limit` distinct words are
 * kept. Duplicate words keep their first vector and add a warning.
 */
inline PretrainedEmbeddings load_embeddings(const std::filesystem::path& path,
                                            std::optional<std::size_t> vocab_limit = std::nullopt,
                                            std::uint64_t seed = 0) {
  const std::string src = path.string();
  std::ifstream in = detail::open_input(path);
  std::string line;
  if (!detail::read_line(in, line)) throw ParseError(src, 1, "missing header");
  const auto header = detail::split(detail::trim(line), ' ');
  std::optional<std::size_t> declared, dim;
  if (header.size() == 2) {
    declared = detail::parse_count(header[0]);
    dim = detail::parse_count(header[1]);
  }
  if (!declared || !dim || *dim == 0) {
    throw ParseError(src, 1, "malformed header, expected \"<count> <dim>\", got \"" + line + "\"");
  }

  PretrainedEmbeddings out;
  std::vector<double> values(kReservedCount * *dim, 0.0);
  std::size_t loaded = 0;
  std::size_t line_no = 1;
  while ((!vocab_limit || loaded < *vocab_limit) && detail::read_line(in, line)) {
    ++line_no;
    std::string_view body = detail::trim(line);
    if (body.empty()) continue;
    std::vector<std::string_view> fields;
    for (std::string_view f : detail::split(body, ' ')) {
      if (!f.empty()) fields.push_back(f);
    }
    if (fields.size() != *dim + 1) {
      throw ParseError(src, line_no,
                       "expected " + std::to_string(*dim) + " values for \"" + std::string(fields[0]) +
                           "\", got " + std::to_string(fields.size() - 1));
    }
    const std::string token(fields[0]);
    if (out.vocab.contains(token)) {
      out.warnings.push_back(src + ":" + std::to_string(line_no) + ": duplicate token \"" + token +
                             "\", keeping first");
      continue;
    }
    const std::size_t base = values.size();
    values.resize(base + *dim);
    for (std::size_t j = 0; j < *dim; ++j) {
      auto v = detail::parse_double(fields[j + 1]);
      if (!v) throw ParseError(src, line_no, "bad number \"" + std::string(fields[j + 1]) + "\"");
      values[base + j] = *v;
    }
    out.vocab.add(token);
    ++loaded;
  }
  if (loaded == 0) throw ParseError(src, line_no, "no word vectors");
  if (!vocab_limit && loaded != *declared) {
    out.warnings.push_back(src + ": header declares " + std::to_string(*declared) + " words, loaded " +
                           std::to_string(loaded));
  }

  const std::size_t d = *dim;
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < loaded; ++r) s += values[(kReservedCount + r) * d + j];
    values[kUnkId * d + j] = s / static_cast<double>(loaded);
  }
  Rng rng(seed, Stream::kSpecialTokens);
  for (TokenId id : {kStartId, kEndId}) {
    for (std::size_t j = 0; j < d; ++j) values[id * d + j] = rng.uniform(-0.1, 0.1);
  }
  out.table = EmbeddingTable(Tensor::matrix(kReservedCount + loaded, d, std::move(values)));
  return out;
}

// Tokenizes, truncates to `max_len`, and maps to ids (OOV -> <unk>).
inline TokenIds to_ids(const Vocabulary& vocab, std::string_view sentence, std::size_t max_len = kDefaultMaxLen) {
  TokenIds ids;
  for (const std::string& tok : tokenize(sentence)) {
    if (ids.size() == max_len) break;
    ids.push_back(vocab.lookup(tok));
  }
  return ids;
}

// Plain UTF-8 text, one sentence per line; blank lines are dropped.
inline std::vector<std::string> load_corpus(const std::filesystem::path& path) {
  std::ifstream in = detail::open_input(path);
  std::vector<std::string> sentences;
  std::string line;
  while (detail::read_line(in, line)) {
    if (!detail::trim(line).empty()) sentences.push_back(line);
  }
  return sentences;
}

enum class PairFormat { kSick, kSts };

struct SentencePair {
  std::string sentence_a;
  std::string sentence_b;
  double gold = 0.0;
};

struct SentencePairDataset {
  std::string name;
  std::vector<SentencePair> pairs;
  double scale_min = 0.0;
  double scale_max = 5.0;
};

namespace detail {

inline double parse_score(const std::string& src, std::size_t line_no, std::string_view field, double lo,
                          double hi) {
  auto v = parse_double(field);
  if (!v) throw ParseError(src, line_no, "unparseable score \"" + std::string(field) + "\"");
  if (!(*v >= lo && *v <= hi)) {
    throw ParseError(src, line_no,
                     "score " + std::string(trim(field)) + " outside [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
  }
  return *v;
}

inline std::string require_sentence(const std::string& src, std::size_t line_no, std::string_view field) {
  if (trim(field).empty()) throw ParseError(src, line_no, "empty sentence");
  return std::string(field);
}

}  // namespace detail

// STS ships "STS.input.<track>.txt" next to "STS.gs.<track>.txt".
inline std::filesystem::path sts_gold_path(const std::filesystem::path& pairs_path) {
  std::string name = pairs_path.filename().string();
  const auto pos = name.find("input");
  if (pos == std::string::npos) {
    throw ConfigError("cannot derive gold-score file from \"" + pairs_path.string() +
                      "\" (no \"input\" in name); pass it explicitly");
  }
  name.replace(pos, 5, "gs");
  return pairs_path.parent_path() / name;
}

/**
 * SICK: a header line, then pair_ID, sentence_A, sentence_B,
 * relatedness_score, entailment_judgment separated by tabs.
 * STS: tab-separated sentence pairs plus a gold file with one score per
 * line; blank gold lines mark unscored pairs, which are dropped.
 */
inline SentencePairDataset load_pairs(const std::filesystem::path& path, PairFormat format,
                                      std::optional<std::filesystem::path> gold_path = std::nullopt) {
  SentencePairDataset ds;
  ds.name = path.filename().string();
  const std::string src = path.string();
  std::ifstream in = detail::open_input(path);
  std::string line;
  std::size_t line_no = 0;

  if (format == PairFormat::kSick) {
    if (!detail::read_line(in, line)) throw ParseError(src, 1, "missing header line");
    line_no = 1;
    while (detail::read_line(in, line)) {
      ++line_no;
      if (detail::trim(line).empty()) continue;
      const auto cols = detail::split(line, '\t');
      if (cols.size() != 5) {
        throw ParseError(src, line_no, "expected 5 tab-separated columns, got " + std::to_string(cols.size()));
      }
      ds.pairs.push_back({detail::require_sentence(src, line_no, cols[1]),
                          detail::require_sentence(src, line_no, cols[2]),
                          detail::parse_score(src, line_no, cols[3], ds.scale_min, ds.scale_max)});
    }
    return ds;
  }

  const std::filesystem::path gpath = gold_path ? *gold_path : sts_gold_path(path);
  const std::string gsrc = gpath.string();
  std::ifstream gin = detail::open_input(gpath);
  std::vector<std::string> pair_lines;
  while (detail::read_line(in, line)) pair_lines.push_back(line);
  std::vector<std::string> gold_lines;
  while (detail::read_line(gin, line)) gold_lines.push_back(line);
  if (pair_lines.size() != gold_lines.size()) {
    throw ParseError(gsrc, 0,
                     "gold file has " + std::to_string(gold_lines.size()) + " lines but pair file has " +
                         std::to_string(pair_lines.size()));
  }
  for (std::size_t i = 0; i < pair_lines.size(); ++i) {
    line_no = i + 1;
    if (detail::trim(gold_lines[i]).empty()) continue;
    const auto cols = detail::split(pair_lines[i], '\t');
    if (cols.size() != 2) {
      throw ParseError(src, line_no, "expected 2 tab-separated columns, got " + std::to_string(cols.size()));
    }
    ds.pairs.push_back({detail::require_sentence(src, line_no, cols[0]),
                        detail::require_sentence(src, line_no, cols[1]),
                        detail::parse_score(gsrc, line_no, gold_lines[i], ds.scale_min, ds.scale_max)});
  }
  return ds;
}

}  // namespace svae
