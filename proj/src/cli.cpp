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

#include "supcon/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "supcon/analysis.hpp"
#include "supcon/checkpoint.hpp"
#include "supcon/errors.hpp"
#include "supcon/io.hpp"
#include "supcon/text.hpp"

namespace supcon::cli {
namespace {

namespace fs = std::filesystem;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    auto item = trim(s.substr(start, comma - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = comma + 1;
  }
  return out;
}

std::optional<long long> parse_integer(std::string_view s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_real(std::string_view s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

const KeySpec* find_key(std::string_view key) {
  for (const auto& k : RunConfig::schema())
    if (k.key == key) return &k;
  return nullptr;
}

void write_json(const fs::path& path, const io::Json& j) { io::write_text(path, j.dump(2) + "\n"); }

// Every string value in a JSON document, depth first in document order.
void collect_strings(const io::Json& j, std::vector<std::string>& out) {
  if (j.is_string()) {
    out.push_back(j.get<std::string>());
  } else if (j.is_array() || j.is_object()) {
    for (const auto& v : j) collect_strings(v, out);
  }
}

}  // namespace

const std::vector<KeySpec>& RunConfig::schema() {
  using K = ValueKind;
  static const std::vector<KeySpec> keys = {
      {"seed", K::integer, "42", "seed for initialization, shuffling, dropout and masking"},
      {"encoder.num_layers", K::integer, "4", "transformer blocks"},
      {"encoder.num_heads", K::integer, "4", "attention heads per block"},
      {"encoder.hidden_size", K::integer, "64", "hidden size (divisible by num_heads)"},
      {"encoder.ff_size", K::integer, "256", "feed-forward inner size"},
      {"encoder.max_len", K::integer, "64", "maximum sequence length in tokens"},
      {"encoder.dropout", K::real, "0.1", "dropout rate during training"},
      {"vocab.min_count", K::integer, "1", "minimum token frequency kept in the vocabulary"},
      {"pretrain.temperature", K::real, "0.05", "contrastive temperature"},
      {"pretrain.mlm_weight", K::real, "0", "weight of the masked-token objective (0 disables it)"},
      {"pretrain.masking_rate", K::real, "0.15", "masking probability per eligible token"},
      {"pretrain.batch_size", K::integer, "8", "triples per step"},
      {"pretrain.epochs", K::integer, "10", "passes over the training triples"},
      {"pretrain.learning_rate", K::real, "0.001", "AdamW learning rate"},
      {"pretrain.weight_decay", K::real, "0.01", "AdamW decoupled weight decay"},
      {"pretrain.pooling", K::pooling, "mean", "sentence pooling: cls, mean, first_last, top2"},
      {"pretrain.data_fraction", K::real, "1", "fraction of triples used (nested across fractions)"},
      {"pretrain.validation_fraction", K::real, "0.1", "fraction of used triples held out for validation"},
      {"finetune.epochs", K::integer, "7", "fine-tuning epochs"},
      {"finetune.batch_size", K::integer, "16", "examples per fine-tuning step"},
      {"finetune.learning_rate", K::real, "0.001", "fine-tuning learning rate"},
      {"finetune.weight_decay", K::real, "0.01", "fine-tuning weight decay"},
      {"task.kind", K::task_kind, "pair", "task shape: pair, single, mrc"},
      {"task.labels", K::list, "entailment,contradiction,neutral", "class names in head order"},
      {"task.field.text_a", K::text, "text_a", "record field of the first segment (pair tasks)"},
      {"task.field.text_b", K::text, "text_b", "record field of the second segment (pair tasks)"},
      {"task.field.text", K::text, "text", "record field of the sentence (single tasks)"},
      {"task.field.label", K::text, "label", "record field of the label"},
      {"task.field.context", K::text, "context", "record field of the passage (mrc)"},
      {"task.field.question", K::text, "question", "record field of the question (mrc)"},
      {"task.field.choices", K::text, "choices", "record field of the choices (mrc)"},
      {"task.field.answer", K::text, "answer_index", "record field of the gold choice (mrc)"},
      {"task.field.id", K::text, "id", "record field of the example id"},
      {"data.nli", K::text, "", "NLI JSON lines {premise, hypothesis, label, source?}"},
      {"data.held_out", K::text, "", "JSON lines whose strings must not leak into the triples"},
      {"data.triples", K::text, "", "triples JSON lines {sentence1, sentence2, hard_neg}"},
      {"data.extra", K::list, "", "further JSON lines files whose strings feed the vocabulary"},
      {"data.vocab", K::text, "", "vocabulary file, one token per line"},
      {"data.checkpoint", K::text, "", "model checkpoint"},
      {"data.resume", K::text, "", "checkpoint to resume pretraining from"},
      {"data.train", K::text, "", "fine-tuning training records"},
      {"data.dev", K::text, "", "fine-tuning dev records"},
      {"data.eval", K::text, "", "records to evaluate"},
      {"data.contexts", K::text, "", "retrieval contexts {id, sentences}"},
      {"data.claims", K::text, "", "retrieval claims {claim, context_id, evidence, label?}"},
      {"retrieve.label", K::text, "", "keep only claims with this label"},
      {"analyze.attention_a", K::text, "", "first sentence of the attention pair"},
      {"analyze.attention_b", K::text, "", "second sentence of the attention pair"},
      {"sweep.axis", K::text, "", "tau, lambda, mask_rate, pooling or data_fraction"},
      {"sweep.values", K::list, "", "values to sweep (default: the axis grid)"},
  };
  return keys;
}

RunConfig RunConfig::parse(std::string_view contents, const std::string& origin) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0, start = 0;
  while (start < contents.size()) {
    auto nl = contents.find('\n', start);
    if (nl == std::string_view::npos) nl = contents.size();
    auto line = trim(contents.substr(start, nl - start));
    start = nl + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto where = origin + ":" + std::to_string(line_no) + ": ";
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    auto key = trim(std::string_view(line).substr(0, eq));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key \"" + key + "\"");
    try {
      cfg.set(key, trim(std::string_view(line).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const fs::path& path) { return parse(io::read_text(path), path.string()); }

void RunConfig::set(std::string_view key, std::string_view value) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ConfigError("unknown config key \"" + std::string(key) + "\"");
  const std::string v = trim(value);
  const auto bad = [&](const char* what) {
    return ConfigError("key \"" + spec->key + "\" expects " + what + ", got \"" + v + "\"");
  };
  switch (spec->kind) {
    case ValueKind::integer: {
      auto n = parse_integer(v);
      if (!n || *n < 0) throw bad("a non-negative integer");
      break;
    }
    case ValueKind::real:
      if (!parse_real(v)) throw bad("a number");
      break;
    case ValueKind::pooling:
      if (!parse_pooling(v)) throw bad("one of cls, mean, first_last, top2");
      break;
    case ValueKind::task_kind:
      if (!finetune::parse_task_kind(v)) throw bad("one of pair, single, mrc");
      break;
    case ValueKind::text:
    case ValueKind::list:
      break;
  }
  values_[spec->key] = v;
}

void RunConfig::apply_assignment(std::string_view assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("--set expects key=value, got \"" + std::string(assignment) + "\"");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

bool RunConfig::has(std::string_view key) const {
  auto it = values_.find(key);
  if (it != values_.end()) return !it->second.empty();
  const KeySpec* spec = find_key(key);
  return spec && !spec->default_value.empty();
}

bool RunConfig::is_set(std::string_view key) const { return values_.find(key) != values_.end(); }

std::string RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  const KeySpec* spec = find_key(key);
  if (!spec) throw ConfigError("unknown config key \"" + std::string(key) + "\"");
  return spec->default_value;
}

std::string RunConfig::require(std::string_view key) const {
  auto v = get(key);
  if (v.empty()) throw ConfigError("missing required setting \"" + std::string(key) + "\"");
  return v;
}

namespace {
std::size_t as_size(const RunConfig& c, std::string_view key) {
  return static_cast<std::size_t>(*parse_integer(c.get(key)));
}
double as_real(const RunConfig& c, std::string_view key) { return *parse_real(c.get(key)); }
}  // namespace

std::uint64_t RunConfig::seed() const { return static_cast<std::uint64_t>(*parse_integer(get("seed"))); }

EncoderConfig RunConfig::encoder(std::size_t vocab_size) const {
  EncoderConfig e;
  e.num_layers = as_size(*this, "encoder.num_layers");
  e.num_heads = as_size(*this, "encoder.num_heads");
  e.hidden_size = as_size(*this, "encoder.hidden_size");
  e.ff_size = as_size(*this, "encoder.ff_size");
  e.max_len = as_size(*this, "encoder.max_len");
  e.dropout = as_real(*this, "encoder.dropout");
  e.vocab_size = vocab_size;
  e.validate();
  return e;
}

PretrainConfig RunConfig::pretrain() const {
  PretrainConfig p;
  p.temperature = as_real(*this, "pretrain.temperature");
  p.mlm_weight = as_real(*this, "pretrain.mlm_weight");
  p.masking_rate = as_real(*this, "pretrain.masking_rate");
  p.batch_size = as_size(*this, "pretrain.batch_size");
  p.epochs = as_size(*this, "pretrain.epochs");
  p.learning_rate = as_real(*this, "pretrain.learning_rate");
  p.weight_decay = as_real(*this, "pretrain.weight_decay");
  p.seed = seed();
  p.pooling = *parse_pooling(get("pretrain.pooling"));
  p.data_fraction = as_real(*this, "pretrain.data_fraction");
  p.validation_fraction = as_real(*this, "pretrain.validation_fraction");
  p.validate();
  return p;
}

finetune::FinetuneConfig RunConfig::finetune() const {
  finetune::FinetuneConfig f;
  f.epochs = as_size(*this, "finetune.epochs");
  f.batch_size = as_size(*this, "finetune.batch_size");
  f.learning_rate = as_real(*this, "finetune.learning_rate");
  f.weight_decay = as_real(*this, "finetune.weight_decay");
  f.seed = seed();
  f.validate();
  return f;
}

finetune::TaskSpec RunConfig::task() const {
  finetune::FieldMapping m;
  m.text_a = get("task.field.text_a");
  m.text_b = get("task.field.text_b");
  m.text = get("task.field.text");
  m.label = get("task.field.label");
  m.context = get("task.field.context");
  m.question = get("task.field.question");
  m.choices = get("task.field.choices");
  m.answer = get("task.field.answer");
  m.id = get("task.field.id");
  const auto kind = *finetune::parse_task_kind(get("task.kind"));
  finetune::TaskSpec t;
  if (kind == finetune::TaskKind::mrc) {
    t = finetune::TaskSpec::multiple_choice(m);
  } else {
    t.kind = kind;
    t.labels = split_list(get("task.labels"));
    t.fields = m;
  }
  t.validate();
  return t;
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& k : schema()) {
    auto v = get(k.key);
    if (!v.empty()) out += k.key + " = " + v + "\n";
  }
  return out;
}

std::vector<std::string> default_sweep_values(std::string_view axis) {
  if (axis == "tau") return {"0.001", "0.01", "0.05", "0.1", "0.5", "1"};
  if (axis == "lambda") return {"w/o", "0.001", "0.01", "0.05", "0.1", "0.5", "1"};
  if (axis == "mask_rate") return {"0.10", "0.15", "0.20", "0.30", "0.40", "0.50"};
  if (axis == "pooling") return {"cls", "mean", "first_last", "top2"};
  if (axis == "data_fraction") return {"0.25", "0.5", "0.75", "1.0"};
  throw ConfigError("unknown sweep axis \"" + std::string(axis) + "\" (tau, lambda, mask_rate, pooling, data_fraction)");
}

namespace {

struct Context {
  RunConfig config;
  fs::path out_dir;
  std::ostream& out;
};

text::Vocabulary load_vocab(const RunConfig& c) { return text::Vocabulary::load(c.require("data.vocab")); }

Checkpoint load_model(const RunConfig& c, const text::Vocabulary& vocab) {
  auto ckpt = load_checkpoint(c.require("data.checkpoint"));
  if (ckpt.vocab_hash != vocab.hash()) {
    throw ConfigError("checkpoint vocabulary " + ckpt.vocab_hash + " does not match " + c.get("data.vocab") + " (" +
                      vocab.hash() + ")");
  }
  return ckpt;
}

// An explicit pooling setting wins; otherwise the pooling the checkpoint was
// pretrained with.
Pooling analysis_pooling(const RunConfig& c, const Checkpoint& ckpt) {
  if (c.is_set("pretrain.pooling")) return *parse_pooling(c.get("pretrain.pooling"));
  if (ckpt.pretrain.contains("pooling") && ckpt.pretrain["pooling"].is_string()) {
    if (auto p = parse_pooling(ckpt.pretrain["pooling"].get<std::string>())) return *p;
  }
  return *parse_pooling(c.get("pretrain.pooling"));
}

int cmd_prepare(Context& ctx) {
  const auto& c = ctx.config;
  auto examples = text::read_nli_jsonl(c.require("data.nli"));
  auto prepared = text::prepare_contrastive(examples);
  text::write_triples_jsonl(ctx.out_dir / files::kTriples, prepared.triples);
  write_json(ctx.out_dir / files::kStats, prepared.stats.to_json());
  ctx.out << "prepared " << prepared.triples.size() << " triples from " << examples.size() << " examples ("
          << prepared.stats.total.premises << " premises)\n";
  if (!c.has("data.held_out")) return kExitOk;

  std::vector<std::string> held_out;
  io::for_each_jsonl(c.get("data.held_out"), [&](const io::Json& rec, std::size_t) { collect_strings(rec, held_out); });
  auto violations = text::leakage_guard(prepared.triples, held_out);
  io::Json list = io::Json::array();
  for (const auto& v : violations) list.push_back({{"triple_index", v.triple_index}, {"sentences", v.sentences}});
  write_json(ctx.out_dir / files::kLeakage,
             {{"held_out_sentences", held_out.size()}, {"violations", std::move(list)}});
  if (violations.empty()) {
    ctx.out << "leakage guard: no overlap with " << held_out.size() << " held-out sentences\n";
    return kExitOk;
  }
  ctx.out << "leakage guard: " << violations.size() << " triples share sentences with held-out data\n";
  for (const auto& v : violations) {
    for (const auto& s : v.sentences) ctx.out << "  triple " << v.triple_index << ": " << s << "\n";
  }
  return kExitViolations;
}

int cmd_build_vocab(Context& ctx) {
  const auto& c = ctx.config;
  std::vector<std::string> corpus;
  for (const auto& t : text::read_triples_jsonl(c.require("data.triples"))) {
    corpus.push_back(t.sentence1);
    corpus.push_back(t.sentence2);
    corpus.push_back(t.hard_neg);
  }
  for (const auto& path : split_list(c.get("data.extra"))) {
    io::for_each_jsonl(path, [&](const io::Json& rec, std::size_t) { collect_strings(rec, corpus); });
  }
  auto vocab = text::Vocabulary::build(corpus, as_size(c, "vocab.min_count"));
  vocab.save(ctx.out_dir / files::kVocab);
  ctx.out << "vocabulary: " << vocab.size() << " tokens, hash " << vocab.hash() << "\n";
  return kExitOk;
}

TrainResult run_pretrain(const RunConfig& c, std::span<const text::ContrastiveTriple> triples,
                         const text::Vocabulary& vocab, std::ostream* log) {
  auto enc = c.encoder(vocab.size());
  auto pc = c.pretrain();
  std::optional<Checkpoint> resume;
  if (c.has("data.resume")) resume = load_checkpoint(c.get("data.resume"));
  auto on_record = [&](const LossRecord& r) {
    if (log) {
      *log << "epoch " << r.epoch << " step " << r.step << " " << r.split << " contrastive " << fmt(r.contrastive)
           << " mlm " << fmt(r.mlm) << " combined " << fmt(r.combined) << "\n";
    }
  };
  return pretrain(triples, pc, enc, vocab, resume ? &*resume : nullptr, on_record);
}

int cmd_pretrain(Context& ctx) {
  const auto& c = ctx.config;
  auto triples = text::read_triples_jsonl(c.require("data.triples"));
  auto vocab = load_vocab(c);
  auto result = run_pretrain(c, triples, vocab, &ctx.out);
  save_checkpoint(result.checkpoint, ctx.out_dir / files::kCheckpoint);
  io::write_text(ctx.out_dir / files::kLossLog, loss_log_csv(result.log));
  for (auto it = result.log.rbegin(); it != result.log.rend(); ++it) {
    if (it->split == "train") {
      ctx.out << "final train loss: contrastive " << fmt(it->contrastive) << " mlm " << fmt(it->mlm) << " combined "
              << fmt(it->combined) << "\n";
      break;
    }
  }
  return kExitOk;
}

io::Json finetune_summary(const finetune::FinetuneResult& r) {
  io::Json history = io::Json::array();
  for (const auto& h : r.history) {
    history.push_back({{"epoch", h.epoch},
                       {"train_loss", h.train_loss},
                       {"dev_accuracy", h.dev_accuracy},
                       {"dev_macro_f1", h.dev_macro_f1}});
  }
  return {{"best_epoch", r.best_epoch}, {"history", std::move(history)}, {"dev", r.dev.report.to_json()}};
}

finetune::FinetuneResult run_finetune(const RunConfig& c, const Checkpoint& base, const text::Vocabulary& vocab) {
  auto task = c.task();
  auto train = finetune::read_task_jsonl(c.require("data.train"), task);
  auto dev = finetune::read_task_jsonl(c.require("data.dev"), task);
  return finetune::finetune_classifier(base, vocab, task, train, dev, c.finetune());
}

int cmd_finetune(Context& ctx) {
  const auto& c = ctx.config;
  auto vocab = load_vocab(c);
  auto base = load_model(c, vocab);
  auto result = run_finetune(c, base, vocab);
  save_checkpoint(finetune::to_checkpoint(result.model, base, c.finetune()), ctx.out_dir / files::kFinetuned);
  write_json(ctx.out_dir / files::kFinetuneMetrics, finetune_summary(result));
  ctx.out << "best epoch " << result.best_epoch << ": dev accuracy " << fmt(result.dev.report.primary_accuracy())
          << " macro-F1 " << fmt(result.dev.report.macro_f1) << "\n";
  return kExitOk;
}

int cmd_evaluate(Context& ctx) {
  const auto& c = ctx.config;
  auto vocab = load_vocab(c);
  auto model = finetune::from_checkpoint(load_model(c, vocab));
  auto data = finetune::read_task_jsonl(c.require("data.eval"), model.task);
  auto ev = finetune::evaluate(model, vocab, data);
  std::vector<io::Json> lines;
  for (const auto& p : ev.predictions) lines.push_back(p.to_json());
  io::write_jsonl(ctx.out_dir / files::kPredictions, lines);
  write_json(ctx.out_dir / files::kMetrics, ev.report.to_json());
  ctx.out << "accuracy " << fmt(ev.report.primary_accuracy()) << " macro-F1 " << fmt(ev.report.macro_f1) << " over "
          << (ev.report.has_mrc ? ev.report.questions : ev.report.examples)
          << (ev.report.has_mrc ? " questions\n" : " examples\n");
  return kExitOk;
}

std::vector<double> topk_accuracies(std::span<const analysis::RetrievalCase> cases) {
  std::vector<double> acc;
  for (auto k : analysis::kReportTopK) acc.push_back(analysis::accuracy_at_topk(cases, k));
  return acc;
}

std::optional<std::string> label_filter(const RunConfig& c) {
  if (!c.has("retrieve.label")) return std::nullopt;
  return c.get("retrieve.label");
}

int cmd_analyze(Context& ctx) {
  const auto& c = ctx.config;
  auto vocab = load_vocab(c);
  auto ckpt = load_model(c, vocab);
  const Pooling pooling = analysis_pooling(c, ckpt);
  auto triples = text::read_triples_jsonl(c.require("data.triples"));
  auto report = analysis::analyze_triples(ckpt.weights, ckpt.encoder, vocab, triples, pooling);

  if (c.has("data.contexts") || c.has("data.claims")) {
    auto queries = analysis::read_retrieval(c.require("data.contexts"), c.require("data.claims"), label_filter(c));
    auto cases = analysis::embed_queries(ckpt.weights, ckpt.encoder, vocab, queries, pooling);
    report.accuracy_at = topk_accuracies(cases);
  }
  auto j = report.to_json();
  j["pooling"] = std::string(to_string(pooling));
  write_json(ctx.out_dir / files::kAnalysis, j);

  analysis::EmbeddingSet set;
  set.dim = ckpt.encoder.hidden_size;
  std::set<std::string> seen;
  for (const auto& t : triples) {
    for (const auto* s : {&t.sentence1, &t.sentence2, &t.hard_neg}) {
      if (!seen.insert(*s).second) continue;
      set.ids.push_back("s" + std::to_string(set.texts.size()));
      set.texts.push_back(*s);
    }
  }
  set.rows = analysis::embed_texts(ckpt.weights, ckpt.encoder, vocab, set.texts, pooling);
  analysis::write_embeddings(ctx.out_dir / files::kEmbeddings, ctx.out_dir / files::kEmbeddingTexts, set);

  if (c.has("analyze.attention_a") || c.has("analyze.attention_b")) {
    write_json(ctx.out_dir / files::kAttention,
               analysis::attention_json(ckpt.weights, ckpt.encoder, vocab, c.require("analyze.attention_a"),
                                        c.require("analyze.attention_b")));
  }
  ctx.out << "alignment-E " << fmt(report.alignment_e) << " alignment-C " << fmt(report.alignment_c)
          << " uniformity " << fmt(report.uniformity) << "\n";
  return kExitOk;
}

int cmd_retrieve(Context& ctx) {
  const auto& c = ctx.config;
  auto vocab = load_vocab(c);
  auto ckpt = load_model(c, vocab);
  const Pooling pooling = analysis_pooling(c, ckpt);
  auto queries = analysis::read_retrieval(c.require("data.contexts"), c.require("data.claims"), label_filter(c));
  auto cases = analysis::embed_queries(ckpt.weights, ckpt.encoder, vocab, queries, pooling);
  auto acc = topk_accuracies(cases);
  io::Json at;
  for (std::size_t i = 0; i < acc.size(); ++i) at[std::to_string(analysis::kReportTopK[i])] = acc[i];
  io::Json j{{"queries", cases.size()}, {"pooling", std::string(to_string(pooling))}, {"accuracy_at", at}};
  if (auto f = label_filter(c)) j["label_filter"] = *f;
  write_json(ctx.out_dir / files::kRetrieval, j);
  ctx.out << "accuracy@1 " << fmt(acc[0]) << " @3 " << fmt(acc[1]) << " @5 " << fmt(acc[2]) << " @10 " << fmt(acc[3])
          << " over " << cases.size() << " claims\n";
  return kExitOk;
}

// Applies one sweep value to a copy of the run configuration.
RunConfig sweep_leg(const RunConfig& base, const std::string& axis, const std::string& value) {
  RunConfig leg = base;
  if (axis == "tau") {
    leg.set("pretrain.temperature", value);
  } else if (axis == "lambda") {
    leg.set("pretrain.mlm_weight", value == "w/o" ? "0" : value);
  } else if (axis == "mask_rate") {
    leg.set("pretrain.masking_rate", value);
    // The masking rate only matters when the masked-token objective is on.
    if (!(as_real(leg, "pretrain.mlm_weight") > 0.0)) leg.set("pretrain.mlm_weight", "0.1");
  } else if (axis == "pooling") {
    leg.set("pretrain.pooling", value);
  } else if (axis == "data_fraction") {
    leg.set("pretrain.data_fraction", value);
  }
  return leg;
}

int cmd_sweep(Context& ctx) {
  const auto& c = ctx.config;
  const auto axis = c.require("sweep.axis");
  auto values = c.has("sweep.values") ? split_list(c.get("sweep.values")) : default_sweep_values(axis);
  default_sweep_values(axis);  // rejects unknown axes
  auto triples = text::read_triples_jsonl(c.require("data.triples"));
  auto vocab = load_vocab(c);
  c.task();
  c.require("data.train");
  c.require("data.dev");

  std::string csv = "axis,value,dev_accuracy,dev_macro_f1,status\n";
  bool failed = false;
  for (const auto& value : values) {
    std::string row = axis + "," + csv_field(value) + ",";
    try {
      auto leg = sweep_leg(c, axis, value);
      auto pre = run_pretrain(leg, triples, vocab, nullptr);
      auto tuned = run_finetune(leg, pre.checkpoint, vocab);
      const auto& r = tuned.dev.report;
      row += fmt(r.primary_accuracy()) + "," + fmt(r.macro_f1) + ",ok";
      ctx.out << axis << "=" << value << ": dev accuracy " << fmt(r.primary_accuracy()) << " macro-F1 "
              << fmt(r.macro_f1) << "\n";
    } catch (const std::exception& e) {
      failed = true;
      row += ",," + csv_field(std::string("error: ") + e.what());
      ctx.out << axis << "=" << value << ": failed: " << e.what() << "\n";
    }
    csv += row + "\n";
  }
  io::write_text(ctx.out_dir / ("sweep_" + axis + ".csv"), csv);
  return failed ? kExitViolations : kExitOk;
}

struct CommandSpec {
  const char* name;
  const char* help;
  std::vector<std::pair<const char*, const char*>> paths;  // flag, config key
  int (*fn)(Context&);
};

const std::vector<CommandSpec>& commands() {
  static const std::vector<CommandSpec> list = {
      {"prepare", "convert NLI records into contrastive triples", {{"--nli", "data.nli"}, {"--held-out", "data.held_out"}},
       cmd_prepare},
      {"build-vocab", "build the vocabulary from triples (and --extra files)",
       {{"--triples", "data.triples"}, {"--extra", "data.extra"}}, cmd_build_vocab},
      {"pretrain", "contrastive pretraining",
       {{"--triples", "data.triples"}, {"--vocab", "data.vocab"}, {"--resume", "data.resume"}}, cmd_pretrain},
      {"finetune", "fine-tune a classifier head and the encoder",
       {{"--checkpoint", "data.checkpoint"}, {"--vocab", "data.vocab"}, {"--train", "data.train"}, {"--dev", "data.dev"}},
       cmd_finetune},
      {"evaluate", "score a fine-tuned checkpoint",
       {{"--checkpoint", "data.checkpoint"}, {"--vocab", "data.vocab"}, {"--data", "data.eval"}}, cmd_evaluate},
      {"analyze", "alignment, uniformity, embeddings, attention export",
       {{"--checkpoint", "data.checkpoint"},
        {"--vocab", "data.vocab"},
        {"--triples", "data.triples"},
        {"--contexts", "data.contexts"},
        {"--claims", "data.claims"},
        {"--attention-a", "analyze.attention_a"},
        {"--attention-b", "analyze.attention_b"}},
       cmd_analyze},
      {"retrieve", "accuracy@K retrieval of evidence sentences",
       {{"--checkpoint", "data.checkpoint"},
        {"--vocab", "data.vocab"},
        {"--contexts", "data.contexts"},
        {"--claims", "data.claims"},
        {"--label", "retrieve.label"}},
       cmd_retrieve},
      {"sweep", "pretrain + fine-tune per value of one hyperparameter",
       {{"--axis", "sweep.axis"},
        {"--values", "sweep.values"},
        {"--triples", "data.triples"},
        {"--vocab", "data.vocab"},
        {"--train", "data.train"},
        {"--dev", "data.dev"}},
       cmd_sweep},
  };
  return list;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Supervised contrastive sentence-embedding toolkit"};
  app.name(args.empty() ? "supcon" : fs::path(args[0]).filename().string());
  app.require_subcommand(1, 1);
  std::string keys = "Configuration keys (--config file or --set key=value):\n";
  for (const auto& k : RunConfig::schema()) {
    keys += "  " + k.key + (k.default_value.empty() ? "" : " [" + k.default_value + "]") + "  " + k.help + "\n";
  }
  app.footer(keys);

  struct Parsed {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::vector<std::string> sets;
    std::vector<std::string> path_values;
  };
  std::vector<Parsed> parsed(commands().size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands().size(); ++i) {
    const auto& spec = commands()[i];
    auto& p = parsed[i];
    auto* sub = app.add_subcommand(spec.name, spec.help);
    sub->add_option("--config", p.config_path, "key = value run configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", p.seed, "overrides the seed setting");
    sub->add_option("--out", p.out_dir, "output directory")->required();
    sub->add_option("--set", p.sets, "override a setting, key=value (repeatable)")->take_all();
    p.path_values.resize(spec.paths.size());
    for (std::size_t k = 0; k < spec.paths.size(); ++k) {
      sub->add_option(spec.paths[k].first, p.path_values[k], std::string("sets ") + spec.paths[k].second);
    }
    subs.push_back(sub);
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("supcon");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    const auto& spec = commands()[i];
    const auto& p = parsed[i];
    try {
      RunConfig cfg = p.config_path.empty() ? RunConfig{} : RunConfig::load(p.config_path);
      for (const auto& s : p.sets) cfg.apply_assignment(s);
      for (std::size_t k = 0; k < spec.paths.size(); ++k) {
        if (!p.path_values[k].empty()) cfg.set(spec.paths[k].second, p.path_values[k]);
      }
      if (p.seed) cfg.set("seed", std::to_string(*p.seed));
      const fs::path out_dir = p.out_dir;
      fs::create_directories(out_dir);
      io::write_text(out_dir / files::kRunConfig, cfg.serialize());
      Context ctx{cfg, out_dir, out};
      return spec.fn(ctx);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitError;
    }
  }
  return kExitUsage;
}

}  // namespace supcon::cli
