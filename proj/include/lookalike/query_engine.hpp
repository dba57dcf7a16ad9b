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

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "lookalike/error.hpp"
#include "lookalike/hamming_index.hpp"
#include "lookalike/rolling_store.hpp"
#include "lookalike/text_filter.hpp"

namespace lookalike {

struct Query {
  /// Either a raw embedding or the id of an indexed item.
  std::variant<EmbeddingVector, std::string> target;
  SearchParams params;
  std::optional<TextPredicate> predicate;
  /// Maximum Hamming distance of returned hits.
  std::optional<std::size_t> threshold;

  static Query by_item(std::string id, SearchParams params) {
    return Query{std::move(id), params, std::nullopt, std::nullopt};
  }
  static Query by_embedding(EmbeddingVector v, SearchParams params) {
    return Query{std::move(v), params, std::nullopt, std::nullopt};
  }
};

/// Maps an analyst similarity in [0, 1] to a Hamming threshold:
/// round((1 - similarity) * code_bits).
std::size_t similarity_to_threshold(double similarity, std::size_t code_bits);

struct PageHit {
  RankedHit hit;
  std::string product_id;
  std::string title;
  Timestamp timestamp{};
};

struct QueryTimings {
  double prefilter_ms = 0.0;
  double candidate_ms = 0.0;
  double rerank_ms = 0.0;
  double total_ms = 0.0;
};

struct ResultPage {
  std::vector<PageHit> hits;
  QueryTimings timings;

  std::vector<std::string> ids() const;
};

void to_json(nlohmann::json& j, const PageHit& h);
void to_json(nlohmann::json& j, const ResultPage& page);
/// Same document without the timings block; stable across retries.
nlohmann::json page_hits_json(const ResultPage& page);

/// Searches every live segment and merges by (distance, id). Hits beyond the
/// threshold are dropped before truncation to k; with rerank_depth > 0 the
/// merged head is re-ordered by cosine against the query embedding (the
/// stored one for item references).
ResultPage run_query(const RollingStore::ReadView& view, const Query& q);
ResultPage run_query(const RollingStore& store, const Query& q);

struct LatencySummary {
  std::size_t count = 0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  double mean_ms = 0.0;
  double total_ms = 0.0;

  static LatencySummary from(const std::vector<double>& samples_ms);
};

struct QueryOutcome {
  std::optional<ResultPage> page;
  std::optional<ErrorCode> error_code;
  std::string error_message;
  double wall_ms = 0.0;

  bool ok() const noexcept { return page.has_value(); }
};

struct BatchResult {
  std::vector<QueryOutcome> outcomes;
  /// Over successful queries only.
  LatencySummary latency;
};

/// Runs queries one after another against a single snapshot. A failing query
/// fills its own slot and does not disturb the others.
BatchResult batch_query(const RollingStore& store, const std::vector<Query>& queries);

}  // namespace lookalike
