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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "supcon/encoder.hpp"
#include "supcon/finetune.hpp"
#include "supcon/pretrain.hpp"

namespace supcon::cli {

// Process exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;       // bad input, bad config, failed computation
inline constexpr int kExitUsage = 2;       // command-line parse errors
inline constexpr int kExitViolations = 3;  // leakage found, or a sweep leg failed

enum class ValueKind { integer, real, text, pooling, task_kind, list };

struct KeySpec {
  std::string key;
  ValueKind kind;
  std::string default_value;  // empty: unset unless given
  std::string help;
};

// A flat `key = value` run configuration. Lines starting with '#' and blank
// lines are ignored. Every key must appear in schema(); values are
// type-checked when set.
class RunConfig {
 public:
  static const std::vector<KeySpec>& schema();

  static RunConfig parse(std::string_view contents, const std::string& origin = "config");
  static RunConfig load(const std::filesystem::path& path);

  void set(std::string_view key, std::string_view value);
  void apply_assignment(std::string_view assignment);  // "key=value"

  bool has(std::string_view key) const;  // set or defaulted to a non-empty value
  bool is_set(std::string_view key) const;  // given explicitly
  std::string get(std::string_view key) const;  // value or schema default
  std::string require(std::string_view key) const;  // ConfigError when unset

  std::uint64_t seed() const;
  EncoderConfig encoder(std::size_t vocab_size) const;
  PretrainConfig pretrain() const;
  finetune::FinetuneConfig finetune() const;
  finetune::TaskSpec task() const;

  // Every key with a value, in schema order; parse(serialize()) round-trips.
  std::string serialize() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Output files written under --out.
namespace files {
inline constexpr char kRunConfig[] = "run_config.txt";
inline constexpr char kTriples[] = "triples.jsonl";
inline constexpr char kStats[] = "stats.json";
inline constexpr char kLeakage[] = "leakage.json";
inline constexpr char kVocab[] = "vocab.txt";
inline constexpr char kCheckpoint[] = "checkpoint.vcls";
inline constexpr char kLossLog[] = "loss_log.csv";
inline constexpr char kFinetuned[] = "finetuned.vcls";
inline constexpr char kFinetuneMetrics[] = "finetune_metrics.json";
inline constexpr char kMetrics[] = "metrics.json";
inline constexpr char kPredictions[] = "predictions.jsonl";
inline constexpr char kAnalysis[] = "analysis.json";
inline constexpr char kAttention[] = "attention.json";
inline constexpr char kEmbeddings[] = "embeddings.bin";
inline constexpr char kEmbeddingTexts[] = "embeddings.jsonl";
inline constexpr char kRetrieval[] = "retrieval.json";
}  // namespace files

// Default sweep grids, as value strings.
std::vector<std::string> default_sweep_values(std::string_view axis);

}  // namespace supcon::cli
