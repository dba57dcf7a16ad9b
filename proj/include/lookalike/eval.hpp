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
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "lookalike/query_engine.hpp"
#include "lookalike/rolling_store.hpp"
#include "lookalike/variant_candidates.hpp"

namespace lookalike {

using RelevantSet = std::unordered_set<std::string>;

/// |top-R ∩ relevant| / R with R = |relevant|.
double r_precision(const std::vector<std::string>& ranked, const RelevantSet& relevant);

/// (Σ_{i<=K, ranked[i] relevant} Precision@i) / min(R, K).
double average_precision_at_k(const std::vector<std::string>& ranked, const RelevantSet& relevant,
                              std::size_t k);

/// |top-cutoff ∩ relevant| / R.
double recall_at(const std::vector<std::string>& ranked, const RelevantSet& relevant,
                 std::size_t cutoff = 1000);

struct JudgedQuery {
  /// Item reference; when `embedding` is set it is only a label.
  std::string query_id;
  std::optional<EmbeddingVector> embedding;
  RelevantSet relevant;
};

/// JSONL {"query_id", "relevant_ids": [...]}.
std::vector<JudgedQuery> read_judgments(const std::filesystem::path& path);
void write_judgments(const std::filesystem::path& path, const std::vector<JudgedQuery>& judged);

struct QueryMetrics {
  std::string query_id;
  double ap1 = 0.0;
  double ap5 = 0.0;
  double ap10 = 0.0;
  double r_precision = 0.0;
  double recall = 0.0;
  /// Set when the query could not be run; the metrics are then zero.
  std::optional<std::string> error;
};

struct MetricsReport {
  double map1 = 0.0;
  double map5 = 0.0;
  double map10 = 0.0;
  double mean_r_precision = 0.0;
  double recall_1000 = 0.0;
  std::size_t evaluated = 0;
  std::size_t failed = 0;
  std::vector<QueryMetrics> per_query;
};

struct LatencyReport {
  std::size_t query_count = 0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  double mean_ms = 0.0;
  double total_hours = 0.0;

  static LatencyReport from(const LatencySummary& s);
};

struct BenchmarkParams {
  SearchParams search{1000, 0, 0};
  std::size_t recall_cutoff = 1000;
};

struct BenchmarkResult {
  MetricsReport metrics;
  LatencyReport latency;
};

/// Runs every judged query through batch_query. Item-reference queries drop
/// the query item from its own ranking before scoring. Unresolvable queries
/// are counted in `failed` and left out of the means.
BenchmarkResult run_benchmark(const RollingStore& store, const std::vector<JudgedQuery>& judged,
                              const BenchmarkParams& params);

/// Knobs of the synthetic catalog generator. Every item belongs either to a
/// similarity cluster (judged retrieval) or to a variant group.
struct SyntheticSpec {
  std::size_t clusters = 100;
  std::size_t cluster_size = 20;
  std::size_t dim = 512;
  /// Per-coordinate noise around a unit-variance cluster center.
  double noise = 1.0;
  /// Queries per cluster; the remaining members are its relevant set.
  std::size_t queries_per_cluster = 1;

  std::size_t variant_groups = 0;
  std::size_t group_size = 10;
  /// Share of each group's members whose titles are reworded.
  double paraphrase_rate = 0.5;
  double variant_noise = 0.15;
  std::size_t categories = 50;

  /// Exactly round(filter_fraction * total) titles carry filter_term.
  std::string filter_term = "lamp";
  double filter_fraction = 0.0;

  std::uint64_t seed = 1;
  /// Items are spread over [base_time - spread_days, base_time].
  Timestamp base_time = Timestamp{std::chrono::seconds{1767225600}};  // 2026-01-01
  std::size_t spread_days = 28;

  /// kInvalidConfig for an empty or inconsistent spec.
  void validate() const;
  std::size_t total_items() const noexcept {
    return clusters * cluster_size + variant_groups * group_size;
  }
};

void from_json(const nlohmann::json& j, SyntheticSpec& s);

struct SyntheticCorpus {
  std::vector<IngestRecord> records;
  std::vector<JudgedQuery> judgments;
  std::vector<VariantGroup> groups;
  /// Ids of records carrying the filter term.
  std::vector<std::string> filter_matches;
};

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec);

/// Writes vectors.sirv, meta.jsonl, judgments.jsonl and groups.jsonl.
void write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus, std::size_t dim);

/// Builds an in-memory store holding every record (ingested at base_time).
std::unique_ptr<RollingStore> build_store(const StoreConfig& config, const std::vector<IngestRecord>& records,
                                          Timestamp now);

/// "Embedding Type,MAP@1,MAP@5,MAP@10,Mean R-Precision,Approx. Recall"
void write_quality_csv(std::ostream& out,
                       const std::vector<std::pair<std::string, MetricsReport>>& rows);
/// "Embedding Type,min time (ms),max time (ms),mean time (ms),total time (hrs)"
void write_latency_csv(std::ostream& out,
                       const std::vector<std::pair<std::string, LatencyReport>>& rows);

struct FilterLatencyRow {
  std::size_t index_size = 0;
  double with_filter_ms = 0.0;
  double without_filter_ms = 0.0;
};
/// "index_size,with_filter_ms,without_filter_ms"
void write_filter_csv(std::ostream& out, const std::vector<FilterLatencyRow>& rows);

/// Retrieval-quality benchmark over a synthetic catalog, one row per code
/// length. Every item is ingested; judged queries run by item reference.
struct BenchSpec {
  SyntheticSpec corpus;
  std::vector<std::size_t> code_bits{512, 256};
  std::size_t subcode_count = 16;
  std::uint64_t projection_seed = 7;
  std::size_t k = 1000;
  /// Defaults to subcode_count, which makes every search exhaustive.
  std::optional<std::size_t> radius;
  std::size_t rerank_depth = 0;
};

void from_json(const nlohmann::json& j, BenchSpec& s);

struct BenchReport {
  std::vector<std::pair<std::string, MetricsReport>> quality;
  std::vector<std::pair<std::string, LatencyReport>> latency;
};

BenchReport run_bench(const BenchSpec& spec);

}  // namespace lookalike
