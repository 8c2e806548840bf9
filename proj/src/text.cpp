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

#include "supcon/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_set>

#include "supcon/errors.hpp"
#include "supcon/io.hpp"

namespace supcon::text {
namespace {

constexpr const char* kReservedTokens[kNumReserved] = {"[PAD]", "[CLS]", "[SEP]", "[UNK]", "[MASK]"};

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c); }

}  // namespace

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    if (is_space(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* t : kReservedTokens) add(t);
}

void Vocabulary::add(std::string token) {
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus, std::size_t min_count) {
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus) {
    for (auto& tok : split_tokens(sentence)) ++counts[std::move(tok)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (auto& [tok, n] : ranked) {
    if (n < std::max<std::size_t>(min_count, 1)) continue;
    if (vocab.index_.count(tok)) continue;  // a literal "[PAD]" etc. cannot occur, but be exact
    vocab.add(tok);
  }
  return vocab;
}

Vocabulary Vocabulary::parse(std::string_view serialized) {
  Vocabulary vocab;
  vocab.tokens_.clear();
  vocab.index_.clear();
  std::size_t start = 0;
  while (start < serialized.size()) {
    auto end = serialized.find('\n', start);
    if (end == std::string_view::npos) end = serialized.size();
    std::string tok(serialized.substr(start, end - start));
    if (!tok.empty() && tok.back() == '\r') tok.pop_back();
    if (tok.empty()) throw FormatError("vocabulary line " + std::to_string(vocab.size() + 1) + " is empty");
    if (vocab.index_.count(tok)) throw FormatError("duplicate vocabulary token '" + tok + "'");
    vocab.add(std::move(tok));
    start = end + 1;
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (vocab.tokens_.size() <= static_cast<std::size_t>(i) || vocab.tokens_[i] != kReservedTokens[i]) {
      throw FormatError(std::string("vocabulary must start with reserved token ") + kReservedTokens[i] +
                        " at id " + std::to_string(i));
    }
  }
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return parse(io::read_text(path)); }

void Vocabulary::save(const std::filesystem::path& path) const { io::write_text(path, serialize()); }

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

std::string Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::size_t TokenSequence::active() const noexcept {
  return static_cast<std::size_t>(std::count_if(attention_mask.begin(), attention_mask.end(),
                                                [](int m) { return m != 0; }));
}

namespace {

std::vector<int> to_ids(std::string_view text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& tok : split_tokens(text)) ids.push_back(vocab.id(tok));
  return ids;
}

}  // namespace

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  TokenSequence seq;
  seq.ids = to_ids(text, vocab);
  if (seq.ids.size() > max_len) seq.ids.resize(max_len);
  seq.attention_mask.assign(seq.ids.size(), 1);
  return seq;
}

TokenSequence encode_single(std::string_view a, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 3) throw ConfigError("encode_single needs max_len >= 3");
  auto ids = to_ids(a, vocab);
  if (ids.size() + 2 > max_len) ids.resize(max_len - 2);
  TokenSequence seq;
  seq.ids.reserve(ids.size() + 2);
  seq.ids.push_back(kClsId);
  seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
  seq.ids.push_back(kSepId);
  seq.attention_mask.assign(seq.ids.size(), 1);
  return seq;
}

TokenSequence encode_pair(std::string_view a, std::string_view b, const Vocabulary& vocab,
                          std::size_t max_len) {
  if (max_len < 4) throw ConfigError("encode_pair needs max_len >= 4");
  auto ia = to_ids(a, vocab);
  auto ib = to_ids(b, vocab);
  const std::size_t budget = max_len - 3;
  while (ia.size() + ib.size() > budget) {
    if (ia.size() > ib.size()) {
      ia.pop_back();
    } else {
      ib.pop_back();
    }
  }
  TokenSequence seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(kClsId);
  seq.ids.insert(seq.ids.end(), ia.begin(), ia.end());
  seq.ids.push_back(kSepId);
  seq.ids.insert(seq.ids.end(), ib.begin(), ib.end());
  seq.ids.push_back(kSepId);
  seq.attention_mask.assign(seq.ids.size(), 1);
  seq.ids.resize(max_len, kPadId);
  seq.attention_mask.resize(max_len, 0);
  return seq;
}

TokenSequence trim_padding(const TokenSequence& seq) {
  std::size_t n = seq.ids.size();
  while (n > 0 && seq.ids[n - 1] == kPadId && seq.attention_mask[n - 1] == 0) --n;
  TokenSequence out;
  out.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(n));
  out.attention_mask.assign(seq.attention_mask.begin(),
                            seq.attention_mask.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

std::optional<NliLabel> parse_nli_label(std::string_view label) {
  if (label == "entailment") return NliLabel::entailment;
  if (label == "contradiction") return NliLabel::contradiction;
  if (label == "neutral") return NliLabel::neutral;
  return std::nullopt;
}

std::string_view to_string(NliLabel label) {
  switch (label) {
    case NliLabel::entailment:
      return "entailment";
    case NliLabel::contradiction:
      return "contradiction";
    case NliLabel::neutral:
      return "neutral";
  }
  return "neutral";
}

io::Json DatasetStats::to_json() const {
  auto row = [](const SourceStats& s) {
    return io::Json{{"source", s.source},
                          {"premises", s.premises},
                          {"entailment", s.entailment},
                          {"contradiction", s.contradiction},
                          {"triples", s.triples}};
  };
  io::Json j;
  j["sources"] = io::Json::array();
  for (const auto& s : sources) j["sources"].push_back(row(s));
  j["total"] = row(total);
  j["skipped_identical"] = skipped_identical;
  return j;
}

PreparedData prepare_contrastive(std::span<const NliExample> examples) {
  struct Group {
    std::string premise;
    std::string source;
    std::vector<std::string> entailments;
    std::vector<std::string> contradictions;
  };
  std::vector<Group> groups;
  std::unordered_map<std::string, std::size_t> by_premise;
  std::vector<std::string> source_order;
  std::unordered_map<std::string, SourceStats> per_source;

  auto stats_for = [&](const std::string& source) -> SourceStats& {
    auto it = per_source.find(source);
    if (it == per_source.end()) {
      source_order.push_back(source);
      it = per_source.emplace(source, SourceStats{source}).first;
    }
    return it->second;
  };

  for (const auto& ex : examples) {
    if (ex.label == NliLabel::neutral) continue;
    const std::string source = ex.source.empty() ? "default" : ex.source;
    auto& stats = stats_for(source);
    auto key = normalize_whitespace(ex.premise);
    auto [it, inserted] = by_premise.emplace(key, groups.size());
    if (inserted) {
      groups.push_back(Group{key, source, {}, {}});
      ++stats.premises;
    }
    auto& group = groups[it->second];
    if (ex.label == NliLabel::entailment) {
      group.entailments.push_back(ex.hypothesis);
      ++stats.entailment;
    } else {
      group.contradictions.push_back(ex.hypothesis);
      ++stats.contradiction;
    }
  }

  PreparedData out;
  for (const auto& g : groups) {
    const std::size_t k = std::min(g.entailments.size(), g.contradictions.size());
    for (std::size_t i = 0; i < k; ++i) {
      if (normalize_whitespace(g.entailments[i]) == normalize_whitespace(g.contradictions[i])) {
        ++out.stats.skipped_identical;
        continue;
      }
      out.triples.push_back({g.premise, g.entailments[i], g.contradictions[i]});
      ++per_source[g.source].triples;
    }
  }
  for (const auto& s : source_order) {
    const auto& st = per_source[s];
    out.stats.sources.push_back(st);
    out.stats.total.premises += st.premises;
    out.stats.total.entailment += st.entailment;
    out.stats.total.contradiction += st.contradiction;
    out.stats.total.triples += st.triples;
  }
  return out;
}

std::vector<LeakageViolation> leakage_guard(std::span<const ContrastiveTriple> triples,
                                            std::span<const std::string> held_out) {
  std::unordered_set<std::string> held;
  for (const auto& s : held_out) held.insert(normalize_whitespace(s));
  std::vector<LeakageViolation> report;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    LeakageViolation v{i, {}};
    for (const auto* s : {&triples[i].sentence1, &triples[i].sentence2, &triples[i].hard_neg}) {
      if (held.count(normalize_whitespace(*s))) v.sentences.push_back(*s);
    }
    if (!v.sentences.empty()) report.push_back(std::move(v));
  }
  return report;
}

std::vector<NliExample> read_nli_jsonl(const std::filesystem::path& path) {
  std::vector<NliExample> out;
  io::for_each_jsonl(path, [&](const io::Json& rec, std::size_t line) {
    NliExample ex;
    ex.premise = io::require_string(rec, "premise", line);
    ex.hypothesis = io::require_string(rec, "hypothesis", line);
    const auto label = io::require_string(rec, "label", line);
    auto parsed = parse_nli_label(label);
    if (!parsed) throw DataError("unknown NLI label \"" + label + "\"", line);
    ex.label = *parsed;
    if (auto it = rec.find("source"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) throw DataError("field \"source\" must be a string", line);
      ex.source = it->get<std::string>();
    }
    if (normalize_whitespace(ex.premise).empty() || normalize_whitespace(ex.hypothesis).empty()) {
      throw DataError("premise and hypothesis must be non-empty", line);
    }
    out.push_back(std::move(ex));
  });
  return out;
}

std::vector<ContrastiveTriple> read_triples_jsonl(const std::filesystem::path& path) {
  std::vector<ContrastiveTriple> out;
  io::for_each_jsonl(path, [&](const io::Json& rec, std::size_t line) {
    ContrastiveTriple t{io::require_string(rec, "sentence1", line),
                        io::require_string(rec, "sentence2", line),
                        io::require_string(rec, "hard_neg", line)};
    if (t.sentence1.empty() || t.sentence2.empty() || t.hard_neg.empty()) {
      throw DataError("triple fields must be non-empty", line);
    }
    out.push_back(std::move(t));
  });
  return out;
}

void write_triples_jsonl(const std::filesystem::path& path,
                         std::span<const ContrastiveTriple> triples) {
  std::vector<io::Json> records;
  records.reserve(triples.size());
  for (const auto& t : triples) {
    records.push_back({{"sentence1", t.sentence1}, {"sentence2", t.sentence2}, {"hard_neg", t.hard_neg}});
  }
  io::write_jsonl(path, records);
}

}  // namespace supcon::text
