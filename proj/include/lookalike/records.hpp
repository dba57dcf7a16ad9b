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

#pragma once

#include <string>

#include "json.hpp"
#include "lookalike/codec.hpp"
#include "lookalike/time.hpp"

namespace lookalike {

/// One line of the metadata sidecar:
/// {"id", "product_id", "title", "timestamp" (ISO-8601 UTC)}.
struct ItemMetadata {
  std::string id;
  std::string product_id;
  std::string title;
  Timestamp timestamp{};

  friend bool operator==(const ItemMetadata&, const ItemMetadata&) = default;
};

/// Stream element: a new or updated catalog image.
struct IngestRecord {
  std::string id;
  std::string product_id;
  std::string title;
  EmbeddingVector embedding;
  Timestamp timestamp{};

  ItemMetadata metadata() const { return {id, product_id, title, timestamp}; }

  friend bool operator==(const IngestRecord&, const IngestRecord&) = default;
};

void to_json(nlohmann::json& j, const ItemMetadata& m);
void from_json(const nlohmann::json& j, ItemMetadata& m);

/// Metadata fields plus "embedding": [numbers].
void to_json(nlohmann::json& j, const IngestRecord& r);
void from_json(const nlohmann::json& j, IngestRecord& r);

void to_json(nlohmann::json& j, const CodecConfig& c);
void from_json(const nlohmann::json& j, CodecConfig& c);

}  // namespace lookalike
