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
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lookalike/codec.hpp"

namespace lookalike {

/// Dense internal handle of an indexed item. Slots are recycled after removal.
using Slot = std::uint32_t;

struct SearchParams {
  std::size_t k = 10;
  /// Hamming radius covered by the pigeonhole guarantee. radius >= m scans
  /// every item.
  std::size_t radius = 0;
  /// Number of top Hamming hits re-ordered by cosine; 0 disables.
  std::size_t rerank_depth = 0;
};

struct RankedHit {
  std::string id;
  std::size_t hamming_distance = 0;
  std::optional<double> cosine_score;
  std::size_t matched_subcodes = 0;

  friend bool operator==(const RankedHit&, const RankedHit&) = default;
};

struct Candidate {
  Slot slot = 0;
  std::uint32_t matched = 0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Slot bitmap restricting a search to a subset of items.
class AllowList {
 public:
  AllowList() = default;
  AllowList(std::size_t slot_capacity, const std::vector<Slot>& slots);

  bool contains(Slot s) const noexcept { return s < bits_.size() && bits_[s]; }
  std::size_t count() const noexcept { return slots_.size(); }
  /// Ascending.
  const std::vector<Slot>& slots() const noexcept { return slots_; }

 private:
  std::vector<bool> bits_;
  std::vector<Slot> slots_;
};

enum class CandidateMode {
  kEarlyAbandon,
  /// Counts every position before filtering; the reference the pruned path
  /// must agree with.
  kNoPruning,
};

/// Inverted index from (position, subcode value) to posting lists of slots.
///
/// Posting lists are duplicate-free and ascending by slot. An item occupies
/// exactly one posting list per position iff it is in the code store. The
/// index is not internally synchronized; RollingStore serializes writers.
class SubcodeIndex {
 public:
  explicit SubcodeIndex(const CodecConfig& config);

  const CodecConfig& config() const noexcept { return config_; }
  std::size_t subcode_count() const noexcept { return config_.subcode_count; }
  std::size_t size() const noexcept { return id_to_slot_.size(); }
  /// One past the largest slot ever handed out.
  std::size_t slot_capacity() const noexcept { return ids_.size(); }

  /// Upsert. A re-inserted id keeps its slot and has its postings replaced.
  Slot insert(const std::string& id, const BinaryCode& code,
              std::optional<EmbeddingVector> embedding = std::nullopt);
  /// Returns false when the id was not present.
  bool remove(std::string_view id);

  bool contains(std::string_view id) const { return find_slot(id).has_value(); }
  std::optional<Slot> find_slot(std::string_view id) const;
  bool is_live(Slot s) const noexcept { return s < live_.size() && live_[s]; }
  const std::string& id_at(Slot s) const { return ids_[s]; }
  const BinaryCode& code_at(Slot s) const { return codes_[s]; }
  const EmbeddingVector* embedding_at(Slot s) const {
    return embeddings_[s] ? &*embeddings_[s] : nullptr;
  }
  const BinaryCode* code_of(std::string_view id) const;

  /// Live slots, ascending.
  std::vector<Slot> live_slots() const;

  /// Items sharing at least m - radius subcodes with `query` at the same
  /// positions (all items when radius >= m), ascending by slot.
  std::vector<Candidate> candidates(const BinaryCode& query, std::size_t radius,
                                    const AllowList* allow = nullptr,
                                    CandidateMode mode = CandidateMode::kEarlyAbandon) const;

  /// Candidates re-ranked by exact Hamming distance, (distance, id) ascending,
  /// truncated to k. With rerank_depth > 0 and a query embedding, the head of
  /// the list is re-ordered by (cosine desc, id asc).
  std::vector<RankedHit> search(const BinaryCode& query, const SearchParams& params,
                                const AllowList* allow = nullptr,
                                const EmbeddingVector* query_embedding = nullptr) const;

  /// Posting list for (position, value); empty when absent.
  std::vector<Slot> posting(std::size_t position, std::uint64_t value) const;
  /// Total slot occurrences across all posting lists of one position.
  std::size_t posting_occurrences(std::size_t position) const;

 private:
  using PostingMap = std::unordered_map<std::uint64_t, std::vector<Slot>>;

  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::uint64_t subcode_at(Slot s, std::size_t position) const noexcept {
    return subcodes_[static_cast<std::size_t>(s) * config_.subcode_count + position];
  }
  void check_length(const BinaryCode& code) const;
  void unlink(Slot s);
  std::vector<Candidate> scan(const std::vector<std::uint64_t>& query_subcodes,
                              std::size_t min_match, const AllowList* allow) const;

  CodecConfig config_;
  std::size_t subcode_width_;
  std::vector<PostingMap> postings_;
  std::vector<std::string> ids_;
  std::vector<BinaryCode> codes_;
  /// Code words of every slot back to back, for exhaustive scans.
  std::vector<std::uint64_t> words_;
  std::size_t words_per_code_;
  std::vector<std::uint64_t> subcodes_;
  std::vector<std::optional<EmbeddingVector>> embeddings_;
  std::vector<bool> live_;
  std::vector<Slot> free_slots_;
  std::unordered_map<std::string, Slot, StringHash, std::equal_to<>> id_to_slot_;
};

/// Orders hits by (distance asc, id asc).
bool hamming_order(const RankedHit& a, const RankedHit& b);

/// Orders hits by (cosine desc, id asc); unscored hits last.
bool cosine_order(const RankedHit& a, const RankedHit& b);

/// Re-orders the first `depth` hits by (cosine desc, id asc); hits without a
/// cosine score sort after scored ones.
void rerank_by_cosine(std::vector<RankedHit>& hits, std::size_t depth);

}  // namespace lookalike
