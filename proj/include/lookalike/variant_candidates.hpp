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
#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "lookalike/rolling_store.hpp"
#include "lookalike/text_filter.hpp"

namespace lookalike {

struct SoSParams {
  /// Text candidates fetched for the query title (N).
  std::size_t text_candidates = 100;
  /// Image neighbors added per text candidate (k).
  std::size_t image_neighbors = 0;
  /// Hamming radius of the image searches.
  std::size_t radius = 0;
};

enum Provenance : std::uint8_t {
  kFromText = 1,
  kFromImage = 2,
};

struct CandidateSet {
  std::string query_id;
  /// id -> Provenance bits.
  std::map<std::string, std::uint8_t> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool contains(const std::string& id) const { return entries.count(id) != 0; }
};

/// A read-only snapshot of a store for candidate generation: the text corpus
/// is built once and image neighbor lists are cached per reference item.
class VariantContext {
 public:
  explicit VariantContext(const RollingStore& store);

  /// T = top-N titles similar to the query's; result = T plus the top-k image
  /// neighbors of every c in T (c and the query excluded).
  CandidateSet generate(const std::string& query_id, const SoSParams& p);

  /// The first stage alone: top-n titles similar to the query's.
  std::vector<TextHit> text_stage(const std::string& query_id, std::size_t n) const;
  /// The second stage over a given text stage (any prefix of text_stage()).
  CandidateSet expand(const std::string& query_id, std::span<const TextHit> text_hits,
                      std::size_t k, std::size_t radius);

  std::size_t size() const noexcept { return corpus_.size(); }

 private:
  const std::vector<std::string>& neighbors(const std::string& id, std::size_t k, std::size_t radius);

  const RollingStore& store_;
  TextCorpus corpus_;
  std::unordered_map<std::string, std::string> titles_;
  struct CachedNeighbors {
    std::size_t depth = 0;
    std::size_t radius = 0;
    std::vector<std::string> ids;
  };
  std::unordered_map<std::string, CachedNeighbors> neighbor_cache_;
};

/// {"query_id", "candidates": [{"id", "from_text", "from_image"}]} in id order.
void to_json(nlohmann::json& j, const CandidateSet& c);

CandidateSet generate_candidates(const RollingStore& store, const std::string& query_id, const SoSParams& p);

struct VariantGroup {
  std::string group_id;
  std::vector<std::string> member_ids;
};

/// JSONL {"group_id", "member_ids": [...]}.
std::vector<VariantGroup> read_groups(const std::filesystem::path& path);
void write_groups(const std::filesystem::path& path, const std::vector<VariantGroup>& groups);

struct RecallRow {
  std::size_t n = 0;
  std::size_t k = 0;
  double mean_recall = 0.0;
  double mean_candidates = 0.0;
};

struct RecallCurve {
  std::vector<RecallRow> rows;
  std::size_t queries = 0;
  std::size_t skipped_singletons = 0;
  /// Per query (in group order) and grid cell, recall values; rows of
  /// `rows.size()` entries. Kept for pointwise comparisons.
  std::vector<std::vector<double>> per_query_recall;
};

/// Every member of every group with at least two members acts as a query;
/// recall = |candidates ∩ (group \ {query})| / |group \ {query}|.
RecallCurve recall_curve(const RollingStore& store, const std::vector<VariantGroup>& groups,
                         const std::vector<std::size_t>& n_grid, const std::vector<std::size_t>& k_grid,
                         std::size_t radius);

/// CSV header "N,k,mean_recall,mean_candidates".
void to_json(nlohmann::json& j, const RecallCurve& c);

void write_recall_csv(std::ostream& out, const RecallCurve& curve);

}  // namespace lookalike
