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

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "supcon/errors.hpp"
#include "supcon/finetune.hpp"
#include "synthetic.hpp"

using namespace supcon;
using namespace supcon::finetune;

namespace {

const std::filesystem::path kTmp = std::filesystem::temp_directory_path();

EncoderConfig micro_encoder(std::size_t vocab_size) {
  EncoderConfig c;
  c.num_layers = 1;
  c.num_heads = 2;
  c.hidden_size = 16;
  c.ff_size = 32;
  c.max_len = 32;
  c.vocab_size = vocab_size;
  return c;
}

Checkpoint base_for(const text::Vocabulary& vocab, std::uint64_t seed = 3) {
  Checkpoint ck;
  ck.encoder = micro_encoder(vocab.size());
  ck.vocab_hash = vocab.hash();
  ck.weights = EncoderWeights<float>::init(ck.encoder, seed);
  return ck;
}

text::Vocabulary vocab_of(const std::vector<std::string>& texts) { return text::Vocabulary::build(texts, 1); }

TaskData pair_data(const std::vector<testing::PairRecord>& records, const TaskSpec& task) {
  TaskData d;
  for (std::size_t i = 0; i < records.size(); ++i) {
    d.examples.push_back({std::to_string(i), records[i].text_a, records[i].text_b, *task.label_index(records[i].label)});
  }
  return d;
}

TunedModel model_for(const text::Vocabulary& vocab, TaskSpec task) {
  auto base = base_for(vocab);
  return {base.encoder, base.weights, ClassifierHead::init(base.encoder.hidden_size, task.labels.size(), 1), task};
}

}  // namespace

TEST_CASE("task kinds and specs") {
  for (auto k : {TaskKind::pair, TaskKind::single, TaskKind::mrc}) CHECK(parse_task_kind(to_string(k)) == k);
  CHECK_FALSE(parse_task_kind("span").has_value());
  TaskSpec t;
  CHECK_NOTHROW(t.validate());
  CHECK(t.label_index("neutral") == 2u);
  CHECK_FALSE(t.label_index("other").has_value());
  CHECK(TaskSpec::from_json(t.to_json()) == t);
  t.labels = {"only"};
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t.labels = {"a", "a"};
  CHECK_THROWS_AS(t.validate(), ConfigError);
  auto mc = TaskSpec::multiple_choice();
  CHECK(mc.labels == std::vector<std::string>{"entailment", "contradiction"});
  mc.labels.push_back("neutral");
  CHECK_THROWS_AS(mc.validate(), ConfigError);
}

TEST_CASE("read_task_jsonl: unknown label names the line") {
  auto path = kTmp / "supcon_task_bad_label.jsonl";
  io::write_text(path, "{\"text_a\":\"a\",\"text_b\":\"b\",\"label\":\"entailment\"}\n"
                       "\n"
                       "{\"text_a\":\"a\",\"text_b\":\"b\",\"label\":\"refutes\"}\n");
  try {
    read_task_jsonl(path, TaskSpec{});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("refutes") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("read_task_jsonl: field mapping, ids and multiple-choice records") {
  auto path = kTmp / "supcon_task_mapped.jsonl";
  io::write_text(path, "{\"premise\":\"p\",\"hypothesis\":\"h\",\"gold\":\"neutral\",\"id\":\"x1\"}\n"
                       "{\"premise\":\"q\",\"hypothesis\":\"g\",\"gold\":\"entailment\"}\n");
  TaskSpec task;
  task.fields.text_a = "premise";
  task.fields.text_b = "hypothesis";
  task.fields.label = "gold";
  auto d = read_task_jsonl(path, task);
  REQUIRE(d.examples.size() == 2);
  CHECK(d.examples[0].id == "x1");
  CHECK(d.examples[0].label == 2);
  CHECK(d.examples[1].id == "2");
  CHECK(d.examples[1].text_b == "g");

  auto mc = TaskSpec::multiple_choice();
  io::write_text(path, "{\"context\":\"c\",\"question\":\"q\",\"choices\":[\"a\",\"b\",\"c\"],\"answer_index\":2}\n");
  auto m = read_task_jsonl(path, mc);
  REQUIRE(m.questions.size() == 1);
  CHECK(m.questions[0].answer == 2);
  io::write_text(path, "{\"context\":\"c\",\"question\":\"q\",\"choices\":[\"a\",\"b\"],\"answer_index\":2}\n");
  CHECK_THROWS_AS(read_task_jsonl(path, mc), DataError);
  io::write_text(path, "{\"context\":\"c\",\"question\":\"q\",\"choices\":[],\"answer_index\":0}\n");
  CHECK_THROWS_AS(read_task_jsonl(path, mc), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("expand_mrc labels the gold statement entailment") {
  std::vector<MrcQuestion> qs{{"q7", "ctx", "which", {"a", "b", "c"}, 1}};
  auto ex = expand_mrc(qs);
  REQUIRE(ex.size() == 3);
  CHECK(ex[1].text_a == "which b");
  CHECK(ex[1].text_b == "ctx");
  CHECK(ex[1].label == kEntailmentClass);
  CHECK(ex[0].label == kContradictionClass);
  CHECK(ex[2].id == "q7#2");
  CHECK(mrc_statement("q", "c") == "q c");
}

TEST_CASE("argmax_first: ties go to the lowest index, invariant to monotone transforms") {
  CHECK(argmax_first(std::vector<double>{0.2, 0.7, 0.7, 0.1}) == 1);
  CHECK_THROWS_AS(argmax_first(std::vector<double>{}), ContractError);
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> s(1 + rng.below(8));
    for (auto& v : s) v = std::round(rng.uniform(-3, 3) * 4) / 4;  // coarse grid makes ties common
    std::vector<double> f;
    for (double v : s) f.push_back(std::exp(2 * v) + v * v * v);
    CHECK(argmax_first(s) == argmax_first(f));
  }
}

TEST_CASE("mrc_predict: one choice, no choices, hand-set head") {
  const std::vector<std::string> corpus{"the cat sat on a mat", "which animal", "dog bird fish cat"};
  auto vocab = vocab_of(corpus);
  auto model = model_for(vocab, TaskSpec::multiple_choice());
  const std::string context = "the cat sat on a mat", question = "which animal";
  CHECK(mrc_predict(model, vocab, context, question, std::vector<std::string>{"dog"}).choice == 0);
  CHECK_THROWS_AS(mrc_predict(model, vocab, context, question, std::vector<std::string>{}), ContractError);

  const std::vector<std::string> choices{"dog", "bird", "cat", "fish"};
  // entailment logit = s * <h - m, h_2 - m> with m the mean final [CLS] state
  // over the choices, scaled so logits stay well inside the float range
  const std::size_t d = model.encoder.hidden_size;
  std::vector<std::vector<double>> states;
  for (const auto& c : choices) {
    LabeledExample ex{"", mrc_statement(question, c), context, 0};
    auto tape = Tape<float>::inference();
    auto out = forward(tape, encode_example(ex, vocab, model.encoder.max_len), model.weights, model.encoder, false);
    states.emplace_back(out.hidden.back().values().begin(), out.hidden.back().values().begin() + d);
  }
  std::vector<double> m(d, 0.0), dir(d);
  for (const auto& h : states)
    for (std::size_t j = 0; j < d; ++j) m[j] += h[j] / static_cast<double>(states.size());
  double norm = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    dir[j] = states[2][j] - m[j];
    norm += dir[j] * dir[j];
  }
  double offset = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    dir[j] *= 4.0 / norm;
    offset += dir[j] * m[j];
    model.head.weight.at(j, kEntailmentClass) = static_cast<float>(dir[j]);
    model.head.weight.at(j, kContradictionClass) = 0.0f;
  }
  model.head.bias[kEntailmentClass] = static_cast<float>(-offset);
  model.head.bias[kContradictionClass] = 0.0f;
  auto pred = mrc_predict(model, vocab, context, question, choices);
  CHECK(pred.choice == 2);
  CHECK(pred.scores.size() == 4);

  // scaling the head by a positive factor is a monotone transform of every
  // entailment score
  for (auto& w : model.head.weight.values()) w *= 0.25f;
  for (auto& b : model.head.bias.values()) b *= 0.25f;
  CHECK(mrc_predict(model, vocab, context, question, choices).choice == 2);
}

TEST_CASE("mrc_predict: choice is invariant to monotone transforms of the head") {
  const std::vector<std::string> corpus{"alpha beta gamma delta", "which one", "eta theta iota kappa lambda"};
  auto vocab = vocab_of(corpus);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto model = model_for(vocab, TaskSpec::multiple_choice());
    model.head = ClassifierHead::init(model.encoder.hidden_size, 2, seed);
    const std::vector<std::string> choices{"eta", "theta", "iota", "kappa", "lambda"};
    auto base = mrc_predict(model, vocab, "alpha beta gamma delta", "which one", choices);
    const float alpha = 0.1f + static_cast<float>(seed);
    auto scaled = model;
    scaled.head = model.head.clone();
    for (auto& w : scaled.head.weight.values()) w *= alpha;
    for (auto& b : scaled.head.bias.values()) b *= alpha;
    CHECK(mrc_predict(scaled, vocab, "alpha beta gamma delta", "which one", choices).choice == base.choice);
  }
}

TEST_CASE("finetune: one-class training set predicts that class everywhere") {
  TaskSpec task;
  task.kind = TaskKind::single;
  task.labels = {"keep", "drop"};
  testing::TopicLanguage lang(4, 4, 2);
  std::vector<std::string> texts;
  for (const auto& t : lang.triples(30, 5)) texts.push_back(t.sentence1);
  auto vocab = vocab_of(texts);
  TaskData train, dev;
  for (std::size_t i = 0; i < 20; ++i) train.examples.push_back({std::to_string(i), texts[i], "", 0});
  for (std::size_t i = 20; i < 30; ++i) dev.examples.push_back({std::to_string(i), texts[i], "", i % 2});
  FinetuneConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.learning_rate = 5e-3;
  auto r = finetune_classifier(base_for(vocab), vocab, task, train, dev, cfg);
  for (const auto& p : r.dev.predictions) CHECK(p.pred == "keep");
  CHECK(r.dev.report.accuracy == 0.5);
}

TEST_CASE("finetune: identical seeds give identical dev reports and checkpoints") {
  TaskSpec task;
  auto records = testing::marker_pairs(48, 1);
  std::vector<std::string> texts;
  for (const auto& r : records) texts.insert(texts.end(), {r.text_a, r.text_b});
  auto vocab = vocab_of(texts);
  TaskSpec two;
  two.labels = {"entailment", "contradiction"};
  auto train = pair_data({records.begin(), records.begin() + 32}, two);
  auto dev = pair_data({records.begin() + 32, records.end()}, two);
  FinetuneConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  auto base = base_for(vocab);
  auto a = finetune_classifier(base, vocab, two, train, dev, cfg);
  auto b = finetune_classifier(base, vocab, two, train, dev, cfg);
  CHECK(a.dev.report.to_json().dump() == b.dev.report.to_json().dump());
  CHECK(serialize_checkpoint(to_checkpoint(a.model, base, cfg)) == serialize_checkpoint(to_checkpoint(b.model, base, cfg)));
  CHECK(a.history.size() == 2);
  CHECK(a.best_epoch >= 1);

  // the tuned model survives a checkpoint round-trip
  auto restored = from_checkpoint(parse_checkpoint(serialize_checkpoint(to_checkpoint(a.model, base, cfg))));
  CHECK(restored.task == two);
  CHECK(evaluate(restored, vocab, dev).report.to_json() == a.dev.report.to_json());
  CHECK_THROWS_AS(from_checkpoint(base), FormatError);

  // the base checkpoint is not modified by training
  CHECK(serialize_checkpoint(base) == serialize_checkpoint(base_for(vocab)));
}

TEST_CASE("finetune: vocabulary mismatch and bad hyperparameters") {
  auto vocab = vocab_of({"a b c"});
  auto other = vocab_of({"a b c d"});
  TaskData data;
  data.examples.push_back({"0", "a", "b", 0});
  CHECK_THROWS_AS(finetune_classifier(base_for(other), vocab, TaskSpec{}, data, data, FinetuneConfig{}), ConfigError);
  FinetuneConfig bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
