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

#include "supcon/io.hpp"

#include <fstream>
#include <sstream>

#include "supcon/errors.hpp"

namespace supcon::io {

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw DataError(path.string() + ": malformed JSON: " + e.what(), number);
    }
    if (!record.is_object()) throw DataError(path.string() + ": expected a JSON object", number);
    fn(record, number);
  }
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
  std::ostringstream os;
  for (const auto& r : records) os << r.dump() << '\n';
  write_text(path, os.str());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("short write to " + path.string());
}

std::string require_string(const Json& record, const std::string& field, std::size_t line) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string()) {
    throw DataError("missing or non-string field \"" + field + "\"", line);
  }
  return it->get<std::string>();
}

long long require_integer(const Json& record, const std::string& field, std::size_t line) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_number_integer()) {
    throw DataError("missing or non-integer field \"" + field + "\"", line);
  }
  return it->get<long long>();
}

}  // namespace supcon::io
