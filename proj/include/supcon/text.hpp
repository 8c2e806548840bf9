// Copyright 2026 The supcon Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "supcon/io.hpp"

namespace supcon::text {

// Reserved ids, always present at these positions.
inline constexpr int kPadId = 0;
inline constexpr int kClsId = 1;
inline constexpr int kSepId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kMaskId = 4;
inline constexpr int kNumReserved = 5;

inline bool is_special(int id) noexcept {
  return id == kPadId || id == kClsId || id == kSepId || id == kMaskId;
}

// Lowercases ASCII letters, splits on whitespace and splits every ASCII
// punctuation character off as its own token. Non-ASCII bytes pass through.
std::vector<std::string> split_tokens(std::string_view text);

// Trims and collapses whitespace runs to a single space.
std::string normalize_whitespace(std::string_view text);

class Vocabulary {
 public:
  Vocabulary();

  // Tokens with frequency >= min_count, ordered by (frequency desc, token asc)
  // after the reserved tokens. Throws DataError on an empty corpus.
  static Vocabulary build(std::span<const std::string> corpus, std::size_t min_count);

  // One token per line; the line number is the id.
  static Vocabulary load(const std::filesystem::path& path);
  static Vocabulary parse(std::string_view serialized);
  void save(const std::filesystem::path& path) const;
  std::string serialize() const;

  // FNV-1a 64 of serialize(), as 16 hex digits.
  std::string hash() const;

  int id(std::string_view token) const;  // kUnkId when absent
  const std::string& token(int id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct TokenSequence {
  std::vector<int> ids;
  std::vector<int> attention_mask;

  std::size_t size() const noexcept { return ids.size(); }
  std::size_t active() const noexcept;
};

// Plain token ids, truncated to max_len, no special tokens or padding.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len);

// [CLS] a [SEP], truncated to max_len, not padded. Throws ConfigError when
// max_len < 3.
TokenSequence encode_single(std::string_view a, const Vocabulary& vocab, std::size_t max_len);

// [CLS] a [SEP] b [SEP], truncated longest-segment-first so the result fits
// max_len, then padded with [PAD] to exactly max_len. Throws ConfigError when
// max_len < 4.
TokenSequence encode_pair(std::string_view a, std::string_view b, const Vocabulary& vocab,
                          std::size_t max_len);

// Drops trailing [PAD] positions.
TokenSequence trim_padding(const TokenSequence& seq);

enum class NliLabel { entailment, contradiction, neutral };

std::optional<NliLabel> parse_nli_label(std::string_view label);
std::string_view to_string(NliLabel label);

struct NliExample {
  std::string premise;
  std::string hypothesis;
  NliLabel label = NliLabel::neutral;
  std::string source;
};

struct ContrastiveTriple {
  std::string sentence1;
  std::string sentence2;
  std::string hard_neg;

  friend bool operator==(const ContrastiveTriple&, const ContrastiveTriple&) = default;
};

struct SourceStats {
  std::string source;
  std::size_t premises = 0;
  std::size_t entailment = 0;
  std::size_t contradiction = 0;
  std::size_t triples = 0;
};

struct DatasetStats {
  std::vector<SourceStats> sources;  // first-appearance order
  SourceStats total{"total"};
  // Entailment/contradiction pairs dropped because both hypotheses were the
  // same text (a triple needs sentence2 != hard_neg).
  std::size_t skipped_identical = 0;

  io::Json to_json() const;
};

struct PreparedData {
  std::vector<ContrastiveTriple> triples;
  DatasetStats stats;
};

// Groups examples by whitespace-normalized premise (first-appearance order),
// pairs the k-th entailment hypothesis with the k-th contradiction
// hypothesis of each group and drops leftovers. Neutral examples are ignored.
PreparedData prepare_contrastive(std::span<const NliExample> examples);

struct LeakageViolation {
  std::size_t triple_index = 0;
  std::vector<std::string> sentences;  // offending sentences of that triple
};

// Triples that contain a sentence also present in held_out (compared after
// whitespace normalization).
std::vector<LeakageViolation> leakage_guard(std::span<const ContrastiveTriple> triples,
                                            std::span<const std::string> held_out);

std::vector<NliExample> read_nli_jsonl(const std::filesystem::path& path);
std::vector<ContrastiveTriple> read_triples_jsonl(const std::filesystem::path& path);
void write_triples_jsonl(const std::filesystem::path& path,
                         std::span<const ContrastiveTriple> triples);

}  // namespace supcon::text
