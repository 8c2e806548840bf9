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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "supcon/encoder.hpp"
#include "supcon/io.hpp"
#include "supcon/text.hpp"

namespace supcon::analysis {

using Embedding = std::vector<double>;

// Pooled sentence embeddings with the ids and texts they came from.
struct EmbeddingSet {
  std::size_t dim = 0;
  std::vector<Embedding> rows;
  std::vector<std::string> ids;
  std::vector<std::string> texts;

  std::size_t size() const noexcept { return rows.size(); }
  // ContractError on ragged rows or mismatched id/text counts,
  // DegenerateInputError on a zero row.
  void validate() const;
};

// Eval-mode embedding of each text under the given pooling.
std::vector<Embedding> embed_texts(const EncoderWeights<float>& weights, const EncoderConfig& config,
                                   const text::Vocabulary& vocab, std::span<const std::string> texts,
                                   Pooling pooling);

struct RetrievalCase {
  Embedding claim;
  std::vector<Embedding> candidates;
  std::size_t gold = 0;
};

// Candidate indices by descending cosine similarity to the claim; equal
// similarities keep the lower index first.
std::vector<std::size_t> rank_candidates(const RetrievalCase& c);

// Fraction of cases whose gold candidate is among the top k (k is clamped to
// the candidate count). UndefinedMetricError when there are no cases.
double accuracy_at_topk(std::span<const RetrievalCase> cases, std::size_t k);

// Mean squared Euclidean distance between first[i] and second[i].
double alignment(std::span<const Embedding> first, std::span<const Embedding> second);

// log of the mean of exp(-2 ||u - v||^2) over unordered distinct pairs of
// L2-normalized rows.
double uniformity(std::span<const Embedding> rows);

Embedding normalized(const Embedding& v);

inline constexpr std::size_t kReportTopK[] = {1, 3, 5, 10};

struct AnalysisReport {
  double alignment_e = 0.0;
  double alignment_c = 0.0;
  double uniformity = 0.0;
  std::size_t entailment_pairs = 0;
  std::size_t contradiction_pairs = 0;
  std::size_t sentences = 0;
  std::optional<std::vector<double>> accuracy_at;  // aligned with kReportTopK

  io::Json to_json() const;
};

// Alignment is measured between unit-normalized embeddings so that it is on
// the same hypersphere as uniformity. Uniformity covers every distinct
// sentence of the triples.
AnalysisReport analyze_triples(const EncoderWeights<float>& weights, const EncoderConfig& config,
                               const text::Vocabulary& vocab, std::span<const text::ContrastiveTriple> triples,
                               Pooling pooling);

struct AttentionMap {
  std::vector<std::string> tokens;
  std::vector<std::vector<std::vector<double>>> heads;  // [head][row][col]
  std::vector<std::vector<double>> mean;                // head average
};

// Last-layer attention for the [CLS] a [SEP] b [SEP] encoding.
AttentionMap export_attention(const EncoderWeights<float>& weights, const EncoderConfig& config,
                              const text::Vocabulary& vocab, std::string_view a, std::string_view b);

// Both segment orders, (a, b) and (b, a).
io::Json attention_json(const EncoderWeights<float>& weights, const EncoderConfig& config,
                        const text::Vocabulary& vocab, std::string_view a, std::string_view b);

// Binary layout: u32 header_bytes (= 16) | u64 n | u64 d | n*d f32, all
// little-endian. The sidecar is JSON lines {"id", "text"} in row order.
void write_embeddings(const std::filesystem::path& binary, const std::filesystem::path& sidecar,
                      const EmbeddingSet& set);
EmbeddingSet read_embeddings(const std::filesystem::path& binary, const std::filesystem::path& sidecar);

// Retrieval inputs: contexts {"id", "sentences": [...]}, claims
// {"claim", "context_id", "evidence", "label"?}. The gold candidate is the
// context sentence equal to the evidence after whitespace normalization.
struct RetrievalQuery {
  std::string claim;
  std::vector<std::string> candidates;
  std::size_t gold = 0;
};

std::vector<RetrievalQuery> read_retrieval(const std::filesystem::path& contexts, const std::filesystem::path& claims,
                                           const std::optional<std::string>& label_filter);

std::vector<RetrievalCase> embed_queries(const EncoderWeights<float>& weights, const EncoderConfig& config,
                                         const text::Vocabulary& vocab, std::span<const RetrievalQuery> queries,
                                         Pooling pooling);

}  // namespace supcon::analysis
