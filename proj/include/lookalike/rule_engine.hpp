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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "lookalike/codec.hpp"
#include "lookalike/rolling_store.hpp"
#include "lookalike/text_filter.hpp"

namespace lookalike {

enum class CombineMode { kAnd, kImageOnly, kTextOnly };
enum class RuleStatus { kDraft, kFinalized };

struct Seed {
  std::string id;
  /// Absent when the seed came from a store that keeps codes only.
  std::optional<EmbeddingVector> embedding;
  BinaryCode code;
};

struct HammingThreshold {
  std::size_t max_distance = 0;
};
struct CosineFloor {
  double min_cosine = 1.0;
};
using ImageThreshold = std::variant<HammingThreshold, CosineFloor>;

struct Rule {
  std::string id;
  std::string name;
  std::vector<Seed> seeds;
  ImageThreshold threshold = HammingThreshold{};
  std::optional<TextPredicate> predicate;
  CombineMode combine = CombineMode::kAnd;
  Timestamp created{};
  Timestamp updated{};
  RuleStatus status = RuleStatus::kDraft;

  /// At least one seed, thresholds in range, seed codes of the right length,
  /// and embeddings on every seed of a cosine rule.
  void validate(const CodecConfig& codec) const;
  bool uses_cosine() const noexcept { return std::holds_alternative<CosineFloor>(threshold); }
};

/// Seeds are serialized as {"id", "embedding"?, "code"?}; codes are bit
/// strings and are recomputed from embeddings when absent.
void to_json(nlohmann::json& j, const Rule& r);
/// Parses a rule; seed codes are derived with `codec`.
Rule rule_from_json(const nlohmann::json& j, const Codec& codec);

struct RuleDecision {
  bool flagged = false;
  bool image_match = false;
  bool text_match = false;
  /// Best seed by (distance asc | cosine desc), earliest seed on ties.
  std::string best_seed;
  /// Hamming distance for threshold rules, cosine for floor rules.
  double score = 0.0;
};

RuleDecision evaluate_rule(const Rule& rule, const BinaryCode& code, const EmbeddingVector* embedding,
                           const TokenizedTitle& title);
RuleDecision evaluate_rule(const Rule& rule, const Codec& codec, const IngestRecord& record);

struct SimulationHit {
  std::string id;
  std::string best_seed;
  double score = 0.0;
  std::string title;
};

struct SimulationReport {
  std::size_t sample_size = 0;
  std::size_t hit_count = 0;
  double selectivity = 0.0;
  std::vector<SimulationHit> top_hits;
  double elapsed_ms = 0.0;
};

/// Every sample item the rule flags, in score order then id. Threshold rules
/// go through the subcode index with radius = threshold; cosine rules scan
/// stored embeddings.
std::vector<SimulationHit> simulation_hits(const Rule& rule, const RollingStore& sample);
void to_json(nlohmann::json& j, const SimulationReport& r);

SimulationReport simulate(const Rule& rule, const RollingStore& sample, std::size_t limit);

struct SweepFlag {
  std::string item_id;
  std::string rule_id;
  std::string best_seed;
  double score = 0.0;
  bool predicate_matched = false;

  friend bool operator==(const SweepFlag&, const SweepFlag&) = default;
};

struct SweepReport {
  std::uint64_t scanned = 0;
  std::uint64_t skipped = 0;
  /// Sorted by (item_id, rule_id).
  std::vector<SweepFlag> flagged;
  double throughput_per_s = 0.0;
  double progress = 0.0;
  double elapsed_ms = 0.0;
};

void to_json(nlohmann::json& j, const SweepReport& r);

/// Counters a caller can poll while a sweep runs.
struct SweepProgress {
  std::atomic<std::uint64_t> scanned{0};
  std::atomic<std::uint64_t> flagged{0};
  std::atomic<std::uint64_t> total{0};
  std::atomic<bool> done{false};

  double fraction() const;
};

struct SweepOptions {
  std::size_t threads = 1;
  std::size_t batch_size = 1024;
  SweepProgress* progress = nullptr;
  std::function<void(const std::string&)> on_warning;
};

/// Evaluates every record of `corpus` against every rule. The rules must all
/// be finalized. The flag set does not depend on `threads`.
SweepReport sweep(const std::vector<Rule>& rules, const Codec& codec, RecordSource& corpus,
                  const SweepOptions& options = {});

/// Same over a store snapshot, using stored codes (and stored embeddings for
/// cosine rules).
SweepReport sweep_store(const std::vector<Rule>& rules, const RollingStore& store);

/// Rule storage: concurrent readers, serialized writers. Finalized rules
/// cannot be changed.
class RuleBook {
 public:
  RuleBook() = default;
  RuleBook(RuleBook&& other) noexcept;
  RuleBook& operator=(RuleBook&& other) noexcept;

  Rule create(Rule rule, const CodecConfig& codec, Timestamp now);
  std::optional<Rule> get(const std::string& id) const;
  Rule update(Rule rule, const CodecConfig& codec, Timestamp now);
  Rule finalize(const std::string& id, Timestamp now);
  std::vector<Rule> list() const;
  /// Copies of the requested rules; kNotFound for unknown ids.
  std::vector<Rule> snapshot(const std::vector<std::string>& ids) const;

  nlohmann::json to_json() const;
  static RuleBook from_json(const nlohmann::json& j, const Codec& codec);
  void save(const std::filesystem::path& path) const;
  static RuleBook load(const std::filesystem::path& path, const Codec& codec);

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, Rule> rules_;
  std::uint64_t next_id_ = 1;
};

}  // namespace lookalike
