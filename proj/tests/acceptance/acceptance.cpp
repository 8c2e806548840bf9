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


// Acceptance runner. Each criterion prints one line:
//   criterion N: PASS|FAIL <name> (<details>) [<seconds> s]
// Run all of them, or one with --criterion N. Exit status is 0 only when
// every selected criterion passes.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cli_fixture.hpp"
#include "geometry.hpp"
#include "loss_oracle.hpp"
#include "metric_oracles.hpp"
#include "nli_fixtures.hpp"
#include "op_cases.hpp"
#include "supcon/analysis.hpp"
#include "supcon/checkpoint.hpp"
#include "supcon/cli.hpp"
#include "supcon/encoder.hpp"
#include "supcon/finetune.hpp"
#include "supcon/metrics.hpp"
#include "supcon/ops.hpp"
#include "supcon/pretrain.hpp"
#include "supcon/text.hpp"
#include "synthetic.hpp"

using namespace supcon;
namespace fs = std::filesystem;

namespace {

const fs::path kData = SUPCON_TEST_DATA;

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records a failed check; only the first few messages are kept.
  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass || failures < 4) detail += (detail.empty() ? "" : "; ") + what;
    pass = false;
    ++failures;
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }

  int failures = 0;
};

std::string num(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

testing::Rows random_rows(Rng& rng, std::size_t n, std::size_t d) {
  testing::Rows r(n, std::vector<double>(d));
  for (auto& row : r)
    for (auto& v : row) v = rng.uniform(-1, 1);
  return r;
}

Tensor<double> rows_tensor(const testing::Rows& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Tensor<double>({rows.size(), rows.front().size()}, std::move(flat));
}

// --- 1: gradients -----------------------------------------------------------

Outcome gradients() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::uint64_t kSeeds = 100;
  double worst_op = 0.0;
  for (const auto& c : testing::op_cases()) {
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const auto r = c.run(seed);
      worst_op = std::max(worst_op, r.max_rel_error);
      o.require(r.max_rel_error < testing::kGradTolerance, c.name + " seed " + std::to_string(seed) + ": " + r.worst);
    }
  }
  double worst_encoder = 0.0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto r = testing::micro_encoder_grad_check(seed);
    worst_encoder = std::max(worst_encoder, r.max_rel_error);
    o.require(r.max_rel_error < testing::kGradTolerance, "micro-encoder seed " + std::to_string(seed) + ": " + r.worst);
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 60.0, "suite took " + num(elapsed) + " s");
  o.note(std::to_string(testing::op_cases().size()) + " ops and the 2-layer encoder over " + std::to_string(kSeeds) +
         " seeds, worst op " + num(worst_op) + ", worst encoder " + num(worst_encoder));
  return o;
}

// --- 2: loss oracle ---------------------------------------------------------

Outcome loss_oracle() {
  Outcome o;
  const double taus[] = {0.001, 0.05, 1.0};
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Rng rng(derive_seed(0xacc2, i));
    const std::size_t n = 1 + rng.below(8);
    const std::size_t d = 2 + rng.below(15);
    const double tau = taus[i % 3];
    const auto a = random_rows(rng, n, d), p = random_rows(rng, n, d), neg = random_rows(rng, n, d);
    auto tape = Tape<double>::inference();
    const double got = contrastive_loss(tape, rows_tensor(a), rows_tensor(p), rows_tensor(neg), tau).item();
    const double want = testing::contrastive_oracle(a, p, neg, tau);
    worst = std::max(worst, std::abs(got - want));
    o.require(std::abs(got - want) <= 1e-6, "instance " + std::to_string(i) + ": " + num(got, 12) + " vs " + num(want, 12));
  }
  for (double tau : taus) {
    auto tape = Tape<double>::inference();
    const double got = contrastive_loss(tape, rows_tensor({{1, 0}}), rows_tensor({{0.6, 0.8}}),
                                        rows_tensor({{0.6, -0.8}}), tau)
                           .item();
    o.require(std::abs(got - std::numbers::ln2) <= 1e-9, "symmetric case at tau " + num(tau) + " gave " + num(got, 12));
  }
  o.note("1000 instances, max |diff| " + num(worst) + ", symmetric case ln 2");
  return o;
}

// --- 3: triple preparation --------------------------------------------------

Outcome triple_preparation() {
  Outcome o;
  const auto examples = text::read_nli_jsonl(kData / "one_pair_per_premise.jsonl");
  const auto fixture = text::prepare_contrastive(examples);
  o.require(fixture.triples.size() == fixture.stats.total.premises,
            std::to_string(fixture.triples.size()) + " triples from " + std::to_string(fixture.stats.total.premises) +
                " premises");
  o.require(fixture.triples == text::read_triples_jsonl(kData / "golden_triples.jsonl"), "golden triples differ");
  std::size_t total = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto ex = testing::random_nli(40, 4, derive_seed(0xacc3, seed));
    const auto r = text::prepare_contrastive(ex);
    const auto want = testing::min_count_oracle(ex);
    total += want;
    o.require(r.triples.size() == want, "seed " + std::to_string(seed) + ": " + std::to_string(r.triples.size()) +
                                            " triples, oracle " + std::to_string(want));
  }
  o.note("fixture " + std::to_string(fixture.triples.size()) + " triples == premises; 200 random fixtures (" +
         std::to_string(total) + " triples) match the min-count oracle");
  return o;
}

// --- 4: training efficacy ---------------------------------------------------

Outcome training_efficacy() {
  Outcome o;
#ifdef _OPENMP
  omp_set_num_threads(1);
#endif
  const auto t0 = std::chrono::steady_clock::now();
  const testing::TopicLanguage lang(24, 4, 7);
  const auto train = lang.triples(200, 1);
  const auto held_out = lang.triples(100, 2);
  const auto pool = lang.retrieval(100, 20, 3);

  std::vector<std::string> corpus;
  for (const auto* set : {&train, &held_out}) {
    for (const auto& t : *set) corpus.insert(corpus.end(), {t.sentence1, t.sentence2, t.hard_neg});
  }
  std::vector<analysis::RetrievalQuery> queries;
  for (const auto& item : pool) {
    corpus.push_back(item.claim);
    corpus.insert(corpus.end(), item.candidates.begin(), item.candidates.end());
    queries.push_back({item.claim, item.candidates, item.gold});
  }
  const auto vocab = text::Vocabulary::build(corpus, 1);
  EncoderConfig enc;
  enc.vocab_size = vocab.size();
  PretrainConfig pc;
  pc.epochs = 10;

  PretrainConfig at_init = pc;
  at_init.epochs = 0;
  const auto init = pretrain(train, at_init, enc, vocab).checkpoint;
  const auto trained = pretrain(train, pc, enc, vocab);
  const auto& ck = trained.checkpoint;

  std::vector<double> train_losses;
  for (const auto& r : trained.log)
    if (r.split == "train") train_losses.push_back(r.contrastive);
  o.require(train_losses.size() == pc.epochs, "expected one train record per epoch");
  const double first = train_losses.front(), last = train_losses.back();
  o.require(last <= 0.5 * first, "loss " + num(first) + " -> " + num(last));

  const auto before = analysis::analyze_triples(init.weights, init.encoder, vocab, held_out, pc.pooling);
  const auto after = analysis::analyze_triples(ck.weights, ck.encoder, vocab, held_out, pc.pooling);
  o.require(after.alignment_e < after.alignment_c,
            "alignment-E " + num(after.alignment_e) + " not below alignment-C " + num(after.alignment_c));
  o.require(after.uniformity < before.uniformity,
            "uniformity " + num(after.uniformity) + " not below init " + num(before.uniformity));

  const auto cases = analysis::embed_queries(ck.weights, ck.encoder, vocab, queries, pc.pooling);
  const double acc1 = analysis::accuracy_at_topk(cases, 1);
  o.require(acc1 >= 0.9, "accuracy@1 " + num(acc1));
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 300.0, "took " + num(elapsed) + " s");
  o.note("loss " + num(first) + " -> " + num(last) + ", alignment-E " + num(after.alignment_e) + " < C " +
         num(after.alignment_c) + ", uniformity " + num(before.uniformity) + " -> " + num(after.uniformity) +
         ", accuracy@1 " + num(acc1) + " over 20 candidates (chance 0.05)");
  return o;
}

// --- 5: metric oracles ------------------------------------------------------

Outcome metric_oracles() {
  Outcome o;
  constexpr double kTol = 1e-9;
  std::size_t fixtures = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed, ++fixtures) {
    Rng rng(derive_seed(0xacc5, seed));
    const std::size_t classes = 2 + rng.below(4);
    const std::size_t n = 1 + rng.below(60);
    std::vector<std::size_t> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = rng.below(classes);
      pred[i] = rng.bernoulli(0.6) ? gold[i] : rng.below(classes);
    }
    const auto cm = metrics::ConfusionMatrix::from_predictions(gold, pred, classes);
    const auto tag = " (seed " + std::to_string(seed) + ")";
    o.require(std::abs(metrics::accuracy(cm) - testing::accuracy_oracle(gold, pred)) <= kTol, "accuracy" + tag);
    o.require(std::abs(metrics::macro_f1(cm).macro - testing::macro_f1_oracle(gold, pred, classes)) <= kTol,
              "macro-F1" + tag);
    o.require(std::abs(metrics::mrc_accuracy(pred, gold) - testing::accuracy_oracle(gold, pred)) <= kTol,
              "mrc accuracy" + tag);

    const std::size_t d = 2 + rng.below(10);
    std::vector<analysis::RetrievalCase> cases;
    for (std::size_t q = 0, nq = 1 + rng.below(12); q < nq; ++q) {
      analysis::RetrievalCase c;
      c.claim = testing::random_vector(rng, d);
      for (std::size_t k = 0, nc = 1 + rng.below(15); k < nc; ++k) c.candidates.push_back(testing::random_vector(rng, d));
      c.gold = rng.below(c.candidates.size());
      if (rng.bernoulli(0.3)) c.candidates[c.gold] = c.claim;
      cases.push_back(std::move(c));
    }
    for (std::size_t k : {1, 3, 5, 10}) {
      double hits = 0;
      for (const auto& c : cases) hits += testing::topk_hit_oracle(c.claim, c.candidates, c.gold, k);
      o.require(std::abs(analysis::accuracy_at_topk(cases, k) - hits / static_cast<double>(cases.size())) <= kTol,
                "accuracy@" + std::to_string(k) + tag);
    }

    const std::size_t m = 2 + rng.below(20);
    const auto a = testing::random_vectors(rng, m, d), b = testing::random_vectors(rng, m, d);
    o.require(std::abs(analysis::alignment(a, b) - testing::alignment_oracle(a, b)) <= kTol, "alignment" + tag);
    o.require(std::abs(analysis::uniformity(a) - testing::uniformity_oracle(a)) <= kTol, "uniformity" + tag);
  }
  o.note(std::to_string(fixtures) + " random fixtures: accuracy, macro-F1, mrc accuracy, accuracy@{1,3,5,10}, "
         "alignment, uniformity within 1e-9");
  return o;
}

// --- 6: sweeps --------------------------------------------------------------

Outcome sweeps() {
  Outcome o;
  const auto root = testing::scratch_dir("acceptance_sweeps");
  const auto in = testing::write_pipeline_inputs(root / "in");
  const auto cfg = in.config.string();
  auto run = [&](std::vector<std::string> args) {
    auto r = testing::run_cli(std::move(args));
    o.require(r.code == cli::kExitOk, r.err);
    return r.code == cli::kExitOk;
  };
  if (!run({"prepare", "--config", cfg, "--nli", in.nli.string(), "--out", (root / "prep").string()})) return o;
  const auto triples = (root / "prep" / cli::files::kTriples).string();
  const auto extra = in.train.string() + "," + in.dev.string();
  if (!run({"build-vocab", "--config", cfg, "--triples", triples, "--extra", extra, "--out", (root / "v").string()}))
    return o;
  const auto vocab = (root / "v" / cli::files::kVocab).string();

  const std::vector<std::pair<std::string, std::size_t>> axes = {
      {"tau", 6}, {"lambda", 7}, {"mask_rate", 6}, {"pooling", 4}, {"data_fraction", 4}};
  std::string summary;
  for (const auto& [axis, expected] : axes) {
    const auto out = root / ("sweep_" + axis);
    auto r = testing::run_cli({"sweep", "--config", cfg, "--set", "pretrain.epochs=1", "--set", "finetune.epochs=1",
                               "--axis", axis, "--triples", triples, "--vocab", vocab, "--train", in.train.string(),
                               "--dev", in.dev.string(), "--out", out.string()});
    o.require(r.code == cli::kExitOk, axis + " sweep exit " + std::to_string(r.code) + " " + r.err);
    std::istringstream csv(io::read_text(out / ("sweep_" + axis + ".csv")));
    std::string line;
    std::getline(csv, line);
    o.require(line == "axis,value,dev_accuracy,dev_macro_f1,status", axis + " header: " + line);
    const auto grid = cli::default_sweep_values(axis);
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
      std::vector<std::string> fields;
      std::stringstream ss(line);
      for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
      o.require(fields.size() == 5 && fields[0] == axis, axis + " row: " + line);
      if (fields.size() != 5) continue;
      o.require(rows < grid.size() && fields[1] == grid[rows], axis + " value order: " + line);
      o.require(!fields[2].empty() && !fields[3].empty() && fields[4] == "ok", axis + " row not populated: " + line);
      ++rows;
    }
    o.require(rows == expected, axis + ": " + std::to_string(rows) + " rows, expected " + std::to_string(expected));
    summary += (summary.empty() ? "" : ", ") + axis + " " + std::to_string(rows);
  }
  o.note("rows per axis: " + summary + ", every dev accuracy populated");
  return o;
}

// --- 7: determinism ---------------------------------------------------------

// Every command of the tool, run into `out`. Returns stdout of each command.
std::vector<std::string> run_every_command(const testing::PipelineInputs& in, const fs::path& out, Outcome& o) {
  const auto cfg = in.config.string();
  const auto triples = (out / "prepare" / cli::files::kTriples).string();
  const auto vocab = (out / "build-vocab" / cli::files::kVocab).string();
  const auto base = (out / "pretrain" / cli::files::kCheckpoint).string();
  const auto tuned = (out / "finetune" / cli::files::kFinetuned).string();
  const auto extra = in.train.string() + "," + in.dev.string() + "," + in.contexts.string() + "," + in.claims.string();
  const std::vector<std::vector<std::string>> commands = {
      {"prepare", "--nli", in.nli.string(), "--held-out", in.dev.string()},
      {"build-vocab", "--triples", triples, "--extra", extra},
      {"pretrain", "--set", "pretrain.mlm_weight=0.1", "--triples", triples, "--vocab", vocab},
      {"finetune", "--checkpoint", base, "--vocab", vocab, "--train", in.train.string(), "--dev", in.dev.string()},
      {"evaluate", "--checkpoint", tuned, "--vocab", vocab, "--data", in.dev.string()},
      {"analyze", "--checkpoint", base, "--vocab", vocab, "--triples", triples, "--contexts", in.contexts.string(),
       "--claims", in.claims.string(), "--attention-a", "a b", "--attention-b", "c d"},
      {"retrieve", "--checkpoint", base, "--vocab", vocab, "--contexts", in.contexts.string(), "--claims",
       in.claims.string()},
      {"sweep", "--axis", "tau", "--values", "0.05,0.5", "--triples", triples, "--vocab", vocab, "--train",
       in.train.string(), "--dev", in.dev.string()},
  };
  std::vector<std::string> stdouts;
  for (auto args : commands) {
    const auto name = args.front();
    args.insert(args.end(), {"--config", cfg, "--out", (out / name).string()});
    auto r = testing::run_cli(args);
    o.require(r.code == cli::kExitOk, name + " exit " + std::to_string(r.code) + " " + r.err);
    stdouts.push_back(r.out);
  }
  return stdouts;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), dir).string()] = io::read_text(entry.path());
  }
  return files;
}

// Both runs use the same output directory, so every recorded path matches.
Outcome determinism() {
  Outcome o;
  const auto root = testing::scratch_dir("acceptance_determinism");
  const auto in = testing::write_pipeline_inputs(root / "in");
  const auto out = root / "out";
  const auto first_stdout = run_every_command(in, out, o);
  const auto first = snapshot(out);
  fs::remove_all(out);
  const auto second_stdout = run_every_command(in, out, o);
  const auto second = snapshot(out);
  o.require(first_stdout == second_stdout, "console output differs between runs");
  o.require(first.size() == second.size(), "runs wrote different file sets");
  for (const auto& [name, bytes] : first) {
    auto it = second.find(name);
    o.require(it != second.end() && it->second == bytes, name + " differs");
  }
  o.note("8 commands, " + std::to_string(first.size()) + " output files compared byte for byte across two runs");
  return o;
}

// --- 8: fine-tuning ---------------------------------------------------------

Checkpoint untrained_base(const text::Vocabulary& vocab, std::uint64_t seed) {
  Checkpoint ck;
  ck.encoder.vocab_size = vocab.size();
  ck.vocab_hash = vocab.hash();
  ck.weights = EncoderWeights<float>::init(ck.encoder, seed);
  return ck;
}

Outcome finetuning() {
  Outcome o;
  using namespace finetune;
  FinetuneConfig cfg;  // 7 epochs

  finetune::TaskSpec pair;
  pair.labels = {"entailment", "contradiction"};
  auto to_data = [&](const std::vector<testing::PairRecord>& records) {
    TaskData d;
    for (std::size_t i = 0; i < records.size(); ++i) {
      d.examples.push_back({std::to_string(i), records[i].text_a, records[i].text_b, *pair.label_index(records[i].label)});
    }
    return d;
  };
  const auto train_pairs = testing::marker_pairs(256, 1), dev_pairs = testing::marker_pairs(100, 2);
  std::vector<std::string> texts;
  for (const auto* set : {&train_pairs, &dev_pairs})
    for (const auto& r : *set) texts.insert(texts.end(), {r.text_a, r.text_b});
  const auto pair_vocab = text::Vocabulary::build(texts, 1);
  const auto pair_result =
      finetune_classifier(untrained_base(pair_vocab, 3), pair_vocab, pair, to_data(train_pairs), to_data(dev_pairs), cfg);
  const double pair_acc = pair_result.dev.report.accuracy;
  o.require(pair_result.history.size() <= 7, "more than 7 epochs");
  o.require(pair_acc >= 0.95, "pair dev accuracy " + num(pair_acc));

  constexpr std::size_t kChoices = 4;
  auto mrc_data = [](const std::vector<testing::MrcRecord>& records) {
    TaskData d;
    for (std::size_t i = 0; i < records.size(); ++i) {
      d.questions.push_back({std::to_string(i), records[i].context, records[i].question, records[i].choices,
                             records[i].answer});
    }
    return d;
  };
  const auto train_q = testing::overlap_mrc(160, kChoices, 1), dev_q = testing::overlap_mrc(60, kChoices, 2);
  texts.clear();
  for (const auto* set : {&train_q, &dev_q}) {
    for (const auto& q : *set) {
      texts.push_back(q.context);
      for (const auto& c : q.choices) texts.push_back(mrc_statement(q.question, c));
    }
  }
  const auto mrc_vocab = text::Vocabulary::build(texts, 1);
  const auto mrc = TaskSpec::multiple_choice();
  const auto mrc_result =
      finetune_classifier(untrained_base(mrc_vocab, 4), mrc_vocab, mrc, mrc_data(train_q), mrc_data(dev_q), cfg);
  const double mrc_acc = mrc_result.dev.report.mrc_accuracy;
  const double chance = 1.0 / kChoices;
  o.require(mrc_acc >= chance + 0.2, "mrc accuracy " + num(mrc_acc) + " vs chance " + num(chance));
  o.note("pair dev accuracy " + num(pair_acc) + " (best epoch " + std::to_string(pair_result.best_epoch) +
         " of 7); mrc accuracy " + num(mrc_acc) + " vs chance " + num(chance) + " with " + std::to_string(kChoices) +
         " choices");
  return o;
}

// --- 9: invariances ---------------------------------------------------------

Outcome invariances() {
  Outcome o;
  std::size_t checks = 0;

  for (std::uint64_t seed = 0; seed < 200; ++seed, ++checks) {
    Rng rng(derive_seed(0xacc9, seed, 1));
    const std::size_t d = 1 + rng.below(16);
    auto u = testing::random_vector(rng, d), v = testing::random_vector(rng, d);
    const double s = std::exp(rng.uniform(-6, 6)), t = std::exp(rng.uniform(-6, 6));
    auto tape = Tape<double>::inference();
    auto cos_of = [&](const std::vector<double>& x, const std::vector<double>& y) {
      return ops::cosine_similarity(tape, Tensor<double>({1, d}, x), Tensor<double>({1, d}, y)).item();
    };
    auto su = u, tv = v;
    for (auto& x : su) x *= s;
    for (auto& x : tv) x *= t;
    o.require(std::abs(cos_of(u, v) - cos_of(su, tv)) <= 1e-12, "cosine scale, seed " + std::to_string(seed));
  }

  for (std::uint64_t seed = 0; seed < 100; ++seed, ++checks) {
    Rng rng(derive_seed(0xacc9, seed, 2));
    const std::size_t n = 1 + rng.below(6);
    const auto anchors = rows_tensor(random_rows(rng, n, 5));
    const auto candidates = rows_tensor(random_rows(rng, 2 * n, 5));
    std::vector<std::size_t> reference;
    for (double tau : {0.001, 0.01, 0.05, 0.1, 0.5, 1.0}) {
      auto tape = Tape<double>::inference();
      auto sims = ops::matmul_nt(tape, ops::l2_normalize_rows(tape, anchors), ops::l2_normalize_rows(tape, candidates));
      auto probs = ops::softmax(tape, ops::scale(tape, sims, 1.0 / tau), 1);
      std::vector<std::size_t> arg;
      for (std::size_t r = 0; r < n; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < 2 * n; ++c)
          if (probs.at(r, c) > probs.at(r, best)) best = c;
        arg.push_back(best);
      }
      if (reference.empty()) reference = arg;
      o.require(arg == reference, "temperature argmax, seed " + std::to_string(seed));
    }
  }

  for (std::uint64_t seed = 0; seed < 100; ++seed, ++checks) {
    Rng rng(derive_seed(0xacc9, seed, 3));
    const std::size_t d = 2 + rng.below(8);
    std::vector<analysis::RetrievalCase> cases(1 + rng.below(10));
    for (auto& c : cases) {
      c.claim = testing::random_vector(rng, d);
      c.candidates = testing::random_vectors(rng, 1 + rng.below(20), d);
      c.gold = rng.below(c.candidates.size());
    }
    double previous = 0.0;
    for (std::size_t k = 1; k <= 22; ++k) {
      const double acc = analysis::accuracy_at_topk(cases, k);
      o.require(acc >= previous, "accuracy@K not monotone, seed " + std::to_string(seed));
      previous = acc;
    }
    o.require(previous == 1.0, "accuracy@K below 1 at the pool size, seed " + std::to_string(seed));
  }

  for (std::uint64_t seed = 0; seed < 100; ++seed, ++checks) {
    Rng rng(derive_seed(0xacc9, seed, 4));
    const std::size_t d = 2 + rng.below(10), n = 2 + rng.below(20);
    const auto a = testing::random_vectors(rng, n, d), b = testing::random_vectors(rng, n, d);
    const auto q = testing::random_rotation(rng, d);
    const auto ra = testing::rotate_all(q, a), rb = testing::rotate_all(q, b);
    o.require(std::abs(analysis::alignment(a, b) - analysis::alignment(ra, rb)) <= 1e-9,
              "alignment under rotation, seed " + std::to_string(seed));
    o.require(std::abs(analysis::uniformity(a) - analysis::uniformity(ra)) <= 1e-9,
              "uniformity under rotation, seed " + std::to_string(seed));
  }

  EncoderConfig enc;
  enc.num_layers = 2;
  enc.num_heads = 2;
  enc.hidden_size = 16;
  enc.ff_size = 32;
  enc.max_len = 24;
  enc.vocab_size = 40;
  for (std::uint64_t seed = 0; seed < 50; ++seed, ++checks) {
    Rng rng(derive_seed(0xacc9, seed, 5));
    const auto weights = EncoderWeights<float>::init(enc, seed);
    text::TokenSequence bare;
    bare.ids.push_back(text::kClsId);
    for (std::size_t i = 0, n = 1 + rng.below(12); i < n; ++i)
      bare.ids.push_back(text::kNumReserved + static_cast<int>(rng.below(enc.vocab_size - text::kNumReserved)));
    bare.ids.push_back(text::kSepId);
    bare.attention_mask.assign(bare.ids.size(), 1);
    auto padded = bare;
    padded.ids.resize(enc.max_len, text::kPadId);
    padded.attention_mask.resize(enc.max_len, 0);
    for (auto pooling : kAllPoolings) {
      const auto x = embed(bare, weights, enc, pooling), y = embed(padded, weights, enc, pooling);
      double worst = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) worst = std::max(worst, static_cast<double>(std::abs(x[j] - y[j])));
      o.require(worst <= 1e-5, std::string("padding changes ") + std::string(to_string(pooling)) + " pooling by " +
                                   num(worst) + ", seed " + std::to_string(seed));
    }
  }
  o.note(std::to_string(checks) + " property instances: cosine scale (1e-12), temperature argmax, accuracy@K "
         "monotone, rotation of alignment and uniformity (1e-9), padding of all poolings (1e-5)");
  return o;
}

struct Criterion {
  int number;
  const char* name;
  Outcome (*fn)();
};

constexpr Criterion kCriteria[] = {
    {1, "gradients", gradients},       {2, "loss oracle", loss_oracle},
    {3, "triple preparation", triple_preparation},
    {4, "training efficacy", training_efficacy},
    {5, "metric oracles", metric_oracles},
    {6, "sweeps", sweeps},
    {7, "determinism", determinism},
    {8, "fine-tuning", finetuning},
    {9, "invariances", invariances},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks; prints one PASS/FAIL line per criterion"};
  int only = 0;
  app.add_option("--criterion", only, "run only this criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (const auto& c : kCriteria) {
    if (only != 0 && c.number != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.fn();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    all_pass = all_pass && outcome.pass;
    std::cout << "criterion " << c.number << ": " << (outcome.pass ? "PASS" : "FAIL") << " " << c.name << " ("
              << outcome.detail << ") [" << num(seconds_since(t0), 3) << " s]" << std::endl;
  }
  return all_pass ? 0 : 1;
}
