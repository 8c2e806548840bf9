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

#include "supcon/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include "supcon/errors.hpp"
#include "supcon/kernels.hpp"
#include "supcon/tape.hpp"

namespace supcon::analysis {
namespace {

static_assert(std::endian::native == std::endian::little, "embedding files assume a little-endian host");

double dot(const Embedding& a, const Embedding& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw DimensionError("cosine of vectors of different sizes");
  const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine similarity of a zero vector");
  return dot(a, b) / (na * nb);
}

template <typename Int>
void put(std::string& out, Int v) {
  char buf[sizeof(Int)];
  std::memcpy(buf, &v, sizeof(Int));
  out.append(buf, sizeof(Int));
}

template <typename Int>
Int take(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(Int) > bytes.size()) throw FormatError("embedding file is truncated");
  Int v;
  std::memcpy(&v, bytes.data() + pos, sizeof(Int));
  pos += sizeof(Int);
  return v;
}

std::vector<std::vector<double>> to_rows(const Tensor<float>& t) {
  std::vector<std::vector<double>> rows(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) rows[r][c] = t.at(r, c);
  return rows;
}

}  // namespace

void EmbeddingSet::validate() const {
  if (ids.size() != rows.size() || texts.size() != rows.size()) {
    throw ContractError("embedding set has " + std::to_string(rows.size()) + " rows but " +
                        std::to_string(ids.size()) + " ids and " + std::to_string(texts.size()) + " texts");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) throw ContractError("embedding row " + std::to_string(i) + " has the wrong size");
    if (dot(rows[i], rows[i]) == 0.0) throw DegenerateInputError("embedding row " + std::to_string(i) + " is zero");
  }
}

std::vector<Embedding> embed_texts(const EncoderWeights<float>& weights, const EncoderConfig& config,
                                   const text::Vocabulary& vocab, std::span<const std::string> texts,
                                   Pooling pooling) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto v = embed(text::encode_single(t, vocab, config.max_len), weights, config, pooling);
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

std::vector<std::size_t> rank_candidates(const RetrievalCase& c) {
  std::vector<double> sims;
  sims.reserve(c.candidates.size());
  for (const auto& cand : c.candidates) sims.push_back(cosine(c.claim, cand));
  std::vector<std::size_t> order(sims.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
  return order;
}

double accuracy_at_topk(std::span<const RetrievalCase> cases, std::size_t k) {
  if (k == 0) throw ContractError("accuracy@K needs K >= 1");
  if (cases.empty()) throw UndefinedMetricError("accuracy@K over zero cases");
  std::size_t hits = 0;
  for (const auto& c : cases) {
    if (c.candidates.empty()) throw ContractError("retrieval case without candidates");
    if (c.gold >= c.candidates.size()) throw ContractError("gold index outside the candidate list");
    auto order = rank_candidates(c);
    const std::size_t kk = std::min(k, order.size());
    hits += std::find(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), c.gold) !=
            order.begin() + static_cast<std::ptrdiff_t>(kk);
  }
  return static_cast<double>(hits) / static_cast<double>(cases.size());
}

double alignment(std::span<const Embedding> first, std::span<const Embedding> second) {
  if (first.size() != second.size()) throw ContractError("alignment needs the same number of left and right vectors");
  if (first.empty()) throw UndefinedMetricError("alignment over zero pairs");
  double total = 0.0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (first[i].size() != second[i].size()) throw DimensionError("alignment pair of different sizes");
    double s = 0.0;
    for (std::size_t j = 0; j < first[i].size(); ++j) {
      const double d = first[i][j] - second[i][j];
      s += d * d;
    }
    total += s;
  }
  return total / static_cast<double>(first.size());
}

Embedding normalized(const Embedding& v) {
  const double n = std::sqrt(dot(v, v));
  if (n == 0.0) throw DegenerateInputError("cannot normalize a zero embedding");
  Embedding out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

double uniformity(std::span<const Embedding> rows) {
  if (rows.size() < 2) throw UndefinedMetricError("uniformity needs at least two embeddings");
  const std::size_t d = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.size() != d) throw DimensionError("uniformity rows of different sizes");
    auto u = normalized(r);
    flat.insert(flat.end(), u.begin(), u.end());
  }
  const double n = static_cast<double>(rows.size());
  const double sum = kernels::pairwise_gaussian_sum<double>(flat, rows.size(), d, 2.0);
  return std::log(sum / (n * (n - 1.0) / 2.0));
}

io::Json AnalysisReport::to_json() const {
  io::Json j;
  j["alignment_e"] = alignment_e;
  j["alignment_c"] = alignment_c;
  j["uniformity"] = uniformity;
  j["entailment_pairs"] = entailment_pairs;
  j["contradiction_pairs"] = contradiction_pairs;
  j["sentences"] = sentences;
  if (accuracy_at) {
    io::Json acc;
    for (std::size_t i = 0; i < std::size(kReportTopK); ++i) acc[std::to_string(kReportTopK[i])] = (*accuracy_at)[i];
    j["accuracy_at"] = std::move(acc);
  }
  return j;
}

AnalysisReport analyze_triples(const EncoderWeights<float>& weights, const EncoderConfig& config,
                               const text::Vocabulary& vocab, std::span<const text::ContrastiveTriple> triples,
                               Pooling pooling) {
  if (triples.empty()) throw UndefinedMetricError("analysis needs at least one triple");
  std::vector<std::string> distinct;
  std::unordered_map<std::string, std::size_t> index;
  auto slot = [&](const std::string& s) {
    auto [it, fresh] = index.emplace(s, distinct.size());
    if (fresh) distinct.push_back(s);
    return it->second;
  };
  std::vector<std::size_t> anchor, pos, neg;
  for (const auto& t : triples) {
    anchor.push_back(slot(t.sentence1));
    pos.push_back(slot(t.sentence2));
    neg.push_back(slot(t.hard_neg));
  }
  auto emb = embed_texts(weights, config, vocab, distinct, pooling);
  std::vector<Embedding> unit;
  for (const auto& e : emb) unit.push_back(normalized(e));

  std::vector<Embedding> a, p, n;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    a.push_back(unit[anchor[i]]);
    p.push_back(unit[pos[i]]);
    n.push_back(unit[neg[i]]);
  }
  AnalysisReport r;
  r.alignment_e = alignment(a, p);
  r.alignment_c = alignment(a, n);
  r.uniformity = uniformity(emb);
  r.entailment_pairs = r.contradiction_pairs = triples.size();
  r.sentences = distinct.size();
  return r;
}

AttentionMap export_attention(const EncoderWeights<float>& weights, const EncoderConfig& config,
                              const text::Vocabulary& vocab, std::string_view a, std::string_view b) {
  auto seq = text::trim_padding(text::encode_pair(a, b, vocab, config.max_len));
  auto tape = Tape<float>::inference();
  auto out = forward(tape, seq, weights, config, false);
  AttentionMap map;
  for (int id : seq.ids) map.tokens.push_back(vocab.token(id));
  const auto& last = out.attention.back();
  const std::size_t s = seq.size();
  map.mean.assign(s, std::vector<double>(s, 0.0));
  for (const auto& head : last) {
    map.heads.push_back(to_rows(head));
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j) map.mean[i][j] += map.heads.back()[i][j];
  }
  for (auto& row : map.mean)
    for (auto& x : row) x /= static_cast<double>(last.size());
  return map;
}

io::Json attention_json(const EncoderWeights<float>& weights, const EncoderConfig& config,
                        const text::Vocabulary& vocab, std::string_view a, std::string_view b) {
  io::Json orders = io::Json::array();
  for (int swap = 0; swap < 2; ++swap) {
    auto first = swap ? b : a, second = swap ? a : b;
    auto map = export_attention(weights, config, vocab, first, second);
    orders.push_back({{"order", swap ? "b,a" : "a,b"},
                      {"text_a", std::string(first)},
                      {"text_b", std::string(second)},
                      {"tokens", map.tokens},
                      {"heads", map.heads},
                      {"mean", map.mean}});
  }
  return {{"layer", config.num_layers}, {"num_heads", config.num_heads}, {"orders", std::move(orders)}};
}

void write_embeddings(const std::filesystem::path& binary, const std::filesystem::path& sidecar,
                      const EmbeddingSet& set) {
  set.validate();
  std::string out;
  put<std::uint32_t>(out, 16);
  put<std::uint64_t>(out, set.size());
  put<std::uint64_t>(out, set.dim);
  for (const auto& row : set.rows)
    for (double x : row) put<float>(out, static_cast<float>(x));
  io::write_text(binary, out);
  std::vector<io::Json> lines;
  for (std::size_t i = 0; i < set.size(); ++i) lines.push_back({{"id", set.ids[i]}, {"text", set.texts[i]}});
  io::write_jsonl(sidecar, lines);
}

EmbeddingSet read_embeddings(const std::filesystem::path& binary, const std::filesystem::path& sidecar) {
  const std::string bytes = io::read_text(binary);
  std::size_t pos = 0;
  const auto header = take<std::uint32_t>(bytes, pos);
  if (header != 16) throw FormatError("unexpected embedding header size " + std::to_string(header));
  const auto n = take<std::uint64_t>(bytes, pos);
  const auto d = take<std::uint64_t>(bytes, pos);
  if (d == 0 || (bytes.size() - pos) / sizeof(float) / d != n || (bytes.size() - pos) != n * d * sizeof(float)) {
    throw FormatError("embedding payload does not hold " + std::to_string(n) + " x " + std::to_string(d) + " floats");
  }
  EmbeddingSet set;
  set.dim = d;
  for (std::uint64_t i = 0; i < n; ++i) {
    Embedding row(d);
    for (auto& x : row) x = take<float>(bytes, pos);
    set.rows.push_back(std::move(row));
  }
  io::for_each_jsonl(sidecar, [&](const io::Json& rec, std::size_t line) {
    set.ids.push_back(io::require_string(rec, "id", line));
    set.texts.push_back(io::require_string(rec, "text", line));
  });
  set.validate();
  return set;
}

std::vector<RetrievalQuery> read_retrieval(const std::filesystem::path& contexts, const std::filesystem::path& claims,
                                           const std::optional<std::string>& label_filter) {
  std::map<std::string, std::vector<std::string>> ctx;
  io::for_each_jsonl(contexts, [&](const io::Json& rec, std::size_t line) {
    auto id = io::require_string(rec, "id", line);
    auto it = rec.find("sentences");
    if (it == rec.end() || !it->is_array() || it->empty()) {
      throw DataError("field \"sentences\" must be a non-empty array of strings", line);
    }
    std::vector<std::string> sentences;
    for (const auto& s : *it) {
      if (!s.is_string()) throw DataError("sentences must be strings", line);
      sentences.push_back(s.get<std::string>());
    }
    if (!ctx.emplace(id, std::move(sentences)).second) throw DataError("duplicate context id \"" + id + "\"", line);
  });
  std::vector<RetrievalQuery> out;
  io::for_each_jsonl(claims, [&](const io::Json& rec, std::size_t line) {
    if (label_filter) {
      auto it = rec.find("label");
      if (it == rec.end() || !it->is_string() || it->get<std::string>() != *label_filter) return;
    }
    RetrievalQuery q;
    q.claim = io::require_string(rec, "claim", line);
    auto cid = io::require_string(rec, "context_id", line);
    auto evidence = text::normalize_whitespace(io::require_string(rec, "evidence", line));
    auto found = ctx.find(cid);
    if (found == ctx.end()) throw DataError("unknown context id \"" + cid + "\"", line);
    q.candidates = found->second;
    auto match = std::find_if(q.candidates.begin(), q.candidates.end(),
                              [&](const std::string& s) { return text::normalize_whitespace(s) == evidence; });
    if (match == q.candidates.end()) throw DataError("evidence sentence not found in context \"" + cid + "\"", line);
    q.gold = static_cast<std::size_t>(match - q.candidates.begin());
    out.push_back(std::move(q));
  });
  return out;
}

std::vector<RetrievalCase> embed_queries(const EncoderWeights<float>& weights, const EncoderConfig& config,
                                         const text::Vocabulary& vocab, std::span<const RetrievalQuery> queries,
                                         Pooling pooling) {
  std::vector<RetrievalCase> out;
  for (const auto& q : queries) {
    RetrievalCase c;
    auto v = embed(text::encode_single(q.claim, vocab, config.max_len), weights, config, pooling);
    c.claim.assign(v.begin(), v.end());
    c.candidates = embed_texts(weights, config, vocab, q.candidates, pooling);
    c.gold = q.gold;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace supcon::analysis
