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

#include "supcon/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "supcon/errors.hpp"

namespace supcon {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + offset, 4);
  return v;
}

void put_floats(std::string& out, std::span<const float> values) {
  out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
}

io::Json shape_json(const Shape& s) {
  auto j = io::Json::array();
  for (auto d : s) j.push_back(d);
  return j;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  auto params = ckpt.weights.parameters();
  io::Json header;
  header["format"] = "supcon-checkpoint";
  header["encoder"] = ckpt.encoder.to_json();
  header["pretrain"] = ckpt.pretrain;
  header["vocab_hash"] = ckpt.vocab_hash;
  header["step"] = ckpt.step;
  header["epochs_completed"] = ckpt.epochs_completed;
  auto manifest = io::Json::array();
  std::size_t total = 0;
  for (const auto& p : params) {
    manifest.push_back({{"name", p.name}, {"shape", shape_json(p.tensor.shape())}});
    total += p.tensor.size();
  }
  const std::size_t param_total = total;
  header["parameters"] = manifest;
  if (ckpt.optimizer) {
    header["optimizer"] = {{"kind", "adamw"}, {"step", ckpt.optimizer->step}};
    total += 2 * param_total;
  } else {
    header["optimizer"] = nullptr;
  }
  if (ckpt.head) {
    header["head"] = {{"meta", ckpt.head->meta},
                      {"weight_shape", shape_json(ckpt.head->weight.shape())},
                      {"bias_shape", shape_json(ckpt.head->bias.shape())}};
    total += ckpt.head->weight.size() + ckpt.head->bias.size();
  } else {
    header["head"] = nullptr;
  }
  header["total_floats"] = total;

  const std::string json = header.dump();
  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(json.size()));
  out += json;
  for (const auto& p : params) put_floats(out, p.tensor.values());
  if (ckpt.optimizer) {
    if (ckpt.optimizer->first_moments.size() != params.size() ||
        ckpt.optimizer->second_moments.size() != params.size()) {
      throw ContractError("optimizer snapshot does not match the parameter list");
    }
    for (const auto& m : ckpt.optimizer->first_moments) put_floats(out, m);
    for (const auto& v : ckpt.optimizer->second_moments) put_floats(out, v);
  }
  if (ckpt.head) {
    put_floats(out, ckpt.head->weight.values());
    put_floats(out, ckpt.head->bias.values());
  }
  return out;
}

namespace {

Checkpoint parse_unchecked(std::string_view bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("not a checkpoint: bad magic");
  }
  const auto version = get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t header_len = get_u32(bytes, 8);
  if (12 + header_len > bytes.size()) throw FormatError("checkpoint truncated inside header");
  io::Json header;
  try {
    header = io::Json::parse(bytes.substr(12, header_len));
  } catch (const io::Json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  std::size_t total_floats = 0;
  try {
    ckpt.encoder = EncoderConfig::from_json(header.at("encoder"));
    ckpt.pretrain = header.at("pretrain");
    ckpt.vocab_hash = header.at("vocab_hash").get<std::string>();
    ckpt.step = header.at("step").get<std::uint64_t>();
    ckpt.epochs_completed = header.at("epochs_completed").get<std::size_t>();
    total_floats = header.at("total_floats").get<std::size_t>();
  } catch (const io::Json::exception& e) {
    throw FormatError(std::string("incomplete checkpoint header: ") + e.what());
  }
  const std::size_t payload = bytes.size() - 12 - header_len;
  if (payload != total_floats * sizeof(float)) {
    throw FormatError("checkpoint payload holds " + std::to_string(payload) + " bytes, expected " +
                      std::to_string(total_floats * sizeof(float)));
  }

  std::size_t offset = 12 + header_len;
  auto read_into = [&](std::span<float> dst) {
    std::memcpy(dst.data(), bytes.data() + offset, dst.size() * sizeof(float));
    offset += dst.size() * sizeof(float);
  };

  ckpt.weights = EncoderWeights<float>::init(ckpt.encoder, 0);
  auto params = ckpt.weights.parameters();
  const auto& manifest = header.at("parameters");
  if (manifest.size() != params.size()) throw FormatError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto shape = manifest[i].at("shape").get<Shape>();
    if (manifest[i].at("name").get<std::string>() != params[i].name || shape != params[i].tensor.shape()) {
      throw FormatError("checkpoint parameter " + std::to_string(i) + " does not match the architecture");
    }
  }
  std::size_t param_floats = 0;
  for (auto& p : params) param_floats += p.tensor.size();
  std::size_t expected = param_floats;
  if (!header.at("optimizer").is_null()) expected += 2 * param_floats;
  if (!header.at("head").is_null()) {
    expected += shape_size(header["head"].at("weight_shape").get<Shape>()) +
                shape_size(header["head"].at("bias_shape").get<Shape>());
  }
  if (expected != total_floats) throw FormatError("checkpoint header float count is inconsistent");

  for (auto& p : params) read_into(p.tensor.values());
  if (!header.at("optimizer").is_null()) {
    OptimizerSnapshot snap;
    snap.step = header["optimizer"].at("step").get<std::uint64_t>();
    for (auto* moments : {&snap.first_moments, &snap.second_moments}) {
      for (auto& p : params) {
        std::vector<float> m(p.tensor.size());
        read_into(m);
        moments->push_back(std::move(m));
      }
    }
    ckpt.optimizer = std::move(snap);
  }
  if (!header.at("head").is_null()) {
    HeadState head;
    head.meta = header["head"].at("meta");
    head.weight = Tensor<float>::zeros(header["head"].at("weight_shape").get<Shape>(), true);
    head.bias = Tensor<float>::zeros(header["head"].at("bias_shape").get<Shape>(), true);
    read_into(head.weight.values());
    read_into(head.bias.values());
    ckpt.head = std::move(head);
  }
  return ckpt;
}

}  // namespace

Checkpoint parse_checkpoint(std::string_view bytes) {
  try {
    return parse_unchecked(bytes);
  } catch (const io::Json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint holds an invalid encoder config: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_text(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = io::read_text(path);
  } catch (const DataError& e) {
    throw FormatError(e.what());
  }
  return parse_checkpoint(bytes);
}

}  // namespace supcon
