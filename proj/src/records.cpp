// Copyright 2026 The Lookalike Authors.
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

#include "lookalike/records.hpp"

#include "lookalike/error.hpp"

namespace lookalike {
namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "expected a JSON object");
  const auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::kInvalidArgument, std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const nlohmann::json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw Error(ErrorCode::kInvalidArgument, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

void to_json(nlohmann::json& j, const ItemMetadata& m) {
  j = nlohmann::json{{"id", m.id},
                     {"product_id", m.product_id},
                     {"title", m.title},
                     {"timestamp", format_timestamp(m.timestamp)}};
}

void from_json(const nlohmann::json& j, ItemMetadata& m) {
  m.id = require_string(j, "id");
  if (m.id.empty()) throw Error(ErrorCode::kInvalidArgument, "id must be non-empty");
  m.product_id = require_string(j, "product_id");
  m.title = require_string(j, "title");
  m.timestamp = parse_timestamp(require_string(j, "timestamp"));
}

void to_json(nlohmann::json& j, const IngestRecord& r) {
  to_json(j, r.metadata());
  j["embedding"] = std::vector<float>(r.embedding.values().begin(), r.embedding.values().end());
}

void from_json(const nlohmann::json& j, IngestRecord& r) {
  ItemMetadata m;
  from_json(j, m);
  const auto& e = require(j, "embedding");
  if (!e.is_array()) throw Error(ErrorCode::kInvalidArgument, "embedding must be an array");
  std::vector<float> values;
  values.reserve(e.size());
  for (const auto& x : e) {
    if (!x.is_number()) throw Error(ErrorCode::kInvalidArgument, "embedding entries must be numbers");
    values.push_back(x.get<float>());
  }
  r = IngestRecord{m.id, m.product_id, m.title, EmbeddingVector(std::move(values)), m.timestamp};
}

void to_json(nlohmann::json& j, const CodecConfig& c) {
  j = nlohmann::json{{"D", c.dim}, {"B", c.code_bits}, {"m", c.subcode_count}, {"seed", c.projection_seed}};
}

void from_json(const nlohmann::json& j, CodecConfig& c) {
  c.dim = require(j, "D").get<std::size_t>();
  c.code_bits = require(j, "B").get<std::size_t>();
  c.subcode_count = require(j, "m").get<std::size_t>();
  c.projection_seed = require(j, "seed").get<std::uint64_t>();
}

}  // namespace lookalike
