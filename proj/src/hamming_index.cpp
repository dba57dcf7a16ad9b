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

#include "lookalike/hamming_index.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include "lookalike/error.hpp"

namespace lookalike {

AllowList::AllowList(std::size_t slot_capacity, const std::vector<Slot>& slots)
    : bits_(slot_capacity, false) {
  slots_.reserve(slots.size());
  for (Slot s : slots) {
    if (s >= slot_capacity || bits_[s]) continue;
    bits_[s] = true;
    slots_.push_back(s);
  }
  std::sort(slots_.begin(), slots_.end());
}

SubcodeIndex::SubcodeIndex(const CodecConfig& config) : config_(config) {
  if (config_.code_bits == 0 || config_.subcode_count == 0 ||
      config_.code_bits % config_.subcode_count != 0 || config_.subcode_bits() > 64) {
    throw Error(ErrorCode::kInvalidConfig, "index needs code_bits divisible into subcodes of <= 64 bits");
  }
  subcode_width_ = config_.subcode_bits();
  words_per_code_ = (config_.code_bits + 63) / 64;
  postings_.resize(config_.subcode_count);
}

void SubcodeIndex::check_length(const BinaryCode& code) const {
  if (code.length() != config_.code_bits) {
    throw Error(ErrorCode::kShape, "code length " + std::to_string(code.length()) +
                                       " does not match index code_bits " +
                                       std::to_string(config_.code_bits));
  }
}

std::optional<Slot> SubcodeIndex::find_slot(std::string_view id) const {
  const auto it = id_to_slot_.find(id);
  if (it == id_to_slot_.end()) return std::nullopt;
  return it->second;
}

const BinaryCode* SubcodeIndex::code_of(std::string_view id) const {
  const auto slot = find_slot(id);
  return slot ? &codes_[*slot] : nullptr;
}

std::vector<Slot> SubcodeIndex::live_slots() const {
  std::vector<Slot> out;
  out.reserve(size());
  for (Slot s = 0; s < live_.size(); ++s) {
    if (live_[s]) out.push_back(s);
  }
  return out;
}

void SubcodeIndex::unlink(Slot s) {
  for (std::size_t p = 0; p < config_.subcode_count; ++p) {
    auto it = postings_[p].find(subcode_at(s, p));
    if (it == postings_[p].end()) continue;
    auto& list = it->second;
    const auto pos = std::lower_bound(list.begin(), list.end(), s);
    if (pos != list.end() && *pos == s) list.erase(pos);
    if (list.empty()) postings_[p].erase(it);
  }
}

Slot SubcodeIndex::insert(const std::string& id, const BinaryCode& code,
                          std::optional<EmbeddingVector> embedding) {
  check_length(code);
  if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "item id must be non-empty");
  const std::size_t m = config_.subcode_count;

  Slot slot;
  if (const auto existing = find_slot(id)) {
    slot = *existing;
    unlink(slot);
  } else if (!free_slots_.empty()) {
    slot = free_slots_.back();
    free_slots_.pop_back();
  } else {
    slot = static_cast<Slot>(ids_.size());
    ids_.emplace_back();
    codes_.emplace_back();
    words_.resize(words_.size() + words_per_code_, 0);
    embeddings_.emplace_back();
    live_.push_back(false);
    subcodes_.resize(subcodes_.size() + m, 0);
  }

  ids_[slot] = id;
  codes_[slot] = code;
  std::copy(code.words().begin(), code.words().end(), words_.begin() + static_cast<std::ptrdiff_t>(slot * words_per_code_));
  embeddings_[slot] = std::move(embedding);
  live_[slot] = true;
  id_to_slot_[id] = slot;
  for (std::size_t p = 0; p < m; ++p) {
    const std::uint64_t value = code.extract(p * subcode_width_, subcode_width_);
    subcodes_[static_cast<std::size_t>(slot) * m + p] = value;
    auto& list = postings_[p][value];
    list.insert(std::lower_bound(list.begin(), list.end(), slot), slot);
  }
  return slot;
}

bool SubcodeIndex::remove(std::string_view id) {
  const auto it = id_to_slot_.find(id);
  if (it == id_to_slot_.end()) return false;
  const Slot slot = it->second;
  unlink(slot);
  id_to_slot_.erase(it);
  ids_[slot].clear();
  codes_[slot] = BinaryCode();
  embeddings_[slot].reset();
  live_[slot] = false;
  free_slots_.push_back(slot);
  return true;
}

std::vector<Slot> SubcodeIndex::posting(std::size_t position, std::uint64_t value) const {
  const auto it = postings_.at(position).find(value);
  return it == postings_[position].end() ? std::vector<Slot>{} : it->second;
}

std::size_t SubcodeIndex::posting_occurrences(std::size_t position) const {
  std::size_t total = 0;
  for (const auto& [value, list] : postings_.at(position)) total += list.size();
  return total;
}

std::vector<Candidate> SubcodeIndex::scan(const std::vector<std::uint64_t>& query_subcodes,
                                          std::size_t min_match, const AllowList* allow) const {
  const std::size_t m = config_.subcode_count;
  std::vector<Candidate> out;
  auto visit = [&](Slot s) {
    std::uint32_t matched = 0;
    const std::uint64_t* own = &subcodes_[static_cast<std::size_t>(s) * m];
    for (std::size_t p = 0; p < m; ++p) matched += own[p] == query_subcodes[p];
    if (matched >= min_match) out.push_back({s, matched});
  };
  if (allow != nullptr) {
    for (Slot s : allow->slots()) {
      if (is_live(s)) visit(s);
    }
  } else {
    for (Slot s = 0; s < live_.size(); ++s) {
      if (live_[s]) visit(s);
    }
  }
  return out;
}

std::vector<Candidate> SubcodeIndex::candidates(const BinaryCode& query, std::size_t radius,
                                                const AllowList* allow, CandidateMode mode) const {
  check_length(query);
  const std::size_t m = config_.subcode_count;
  std::vector<std::uint64_t> query_subcodes(m);
  for (std::size_t p = 0; p < m; ++p) {
    query_subcodes[p] = query.extract(p * subcode_width_, subcode_width_);
  }
  if (radius >= m) return scan(query_subcodes, 0, allow);
  const std::size_t min_match = m - radius;

  std::vector<const std::vector<Slot>*> lists(m, nullptr);
  std::size_t posting_work = 0;
  for (std::size_t p = 0; p < m; ++p) {
    const auto it = postings_[p].find(query_subcodes[p]);
    if (it != postings_[p].end()) {
      lists[p] = &it->second;
      posting_work += it->second.size();
    }
  }
  // A small allow-list is cheaper to verify directly than to intersect with
  // long postings; both paths yield the same set.
  if (allow != nullptr && allow->count() * m < posting_work) {
    return scan(query_subcodes, min_match, allow);
  }

  if (mode == CandidateMode::kNoPruning) {
    std::vector<std::uint32_t> counts(slot_capacity(), 0);
    for (const auto* list : lists) {
      if (list == nullptr) continue;
      for (Slot s : *list) ++counts[s];
    }
    std::vector<Candidate> out;
    for (Slot s = 0; s < counts.size(); ++s) {
      if (counts[s] >= min_match && (allow == nullptr || allow->contains(s))) {
        out.push_back({s, counts[s]});
      }
    }
    return out;
  }

  // Shortest postings first. An item within the radius must match at least
  // one of any radius + 1 positions, so only the first radius + 1 lists can
  // introduce candidates; later lists only advance survivors.
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const std::size_t la = lists[a] ? lists[a]->size() : 0;
    const std::size_t lb = lists[b] ? lists[b]->size() : 0;
    return la < lb;
  });

  std::vector<Candidate> alive;
  std::vector<Candidate> next;
  for (std::size_t step = 0; step < m; ++step) {
    const auto* list = lists[order[step]];
    const bool seeding = step <= radius;
    next.clear();
    next.reserve(alive.size() + (seeding && list ? list->size() : 0));
    auto a = alive.begin();
    if (list != nullptr) {
      auto b = list->begin();
      while (a != alive.end() && b != list->end()) {
        if (a->slot < *b) {
          next.push_back(*a++);
        } else if (*b < a->slot) {
          if (seeding && (allow == nullptr || allow->contains(*b))) next.push_back({*b, 1});
          ++b;
        } else {
          next.push_back({a->slot, a->matched + 1});
          ++a;
          ++b;
        }
      }
      if (seeding) {
        for (; b != list->end(); ++b) {
          if (allow == nullptr || allow->contains(*b)) next.push_back({*b, 1});
        }
      }
    }
    next.insert(next.end(), a, alive.end());

    // Early abandonment: drop items that cannot reach min_match even if every
    // remaining position matches.
    const std::size_t remaining = m - step - 1;
    std::erase_if(next, [&](const Candidate& c) { return c.matched + remaining < min_match; });
    alive.swap(next);
    if (alive.empty() && step >= radius) break;
  }
  return alive;
}

bool hamming_order(const RankedHit& a, const RankedHit& b) {
  if (a.hamming_distance != b.hamming_distance) return a.hamming_distance < b.hamming_distance;
  return a.id < b.id;
}

bool cosine_order(const RankedHit& a, const RankedHit& b) {
  if (a.cosine_score.has_value() != b.cosine_score.has_value()) return a.cosine_score.has_value();
  if (a.cosine_score && *a.cosine_score != *b.cosine_score) return *a.cosine_score > *b.cosine_score;
  return a.id < b.id;
}

void rerank_by_cosine(std::vector<RankedHit>& hits, std::size_t depth) {
  const std::size_t n = std::min(depth, hits.size());
  std::stable_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), cosine_order);
}

std::vector<RankedHit> SubcodeIndex::search(const BinaryCode& query, const SearchParams& params,
                                            const AllowList* allow,
                                            const EmbeddingVector* query_embedding) const {
  check_length(query);
  const std::size_t m = config_.subcode_count;

  struct Scored {
    std::size_t distance;
    Slot slot;
    std::uint32_t matched;
  };
  std::vector<Scored> scored;
  const auto qw = query.words();
  const auto distance = [&](Slot s) {
    const std::uint64_t* w = &words_[static_cast<std::size_t>(s) * words_per_code_];
    std::size_t d = 0;
    for (std::size_t i = 0; i < words_per_code_; ++i) d += std::popcount(w[i] ^ qw[i]);
    return d;
  };

  // Exhaustive searches skip subcode matching; matched counts are filled in
  // for the returned head only.
  const bool exhaustive = params.radius >= m;
  if (exhaustive) {
    if (allow != nullptr) {
      scored.reserve(allow->count());
      for (Slot s : allow->slots()) {
        if (is_live(s)) scored.push_back({distance(s), s, 0});
      }
    } else {
      scored.reserve(size());
      for (Slot s = 0; s < live_.size(); ++s) {
        if (live_[s]) scored.push_back({distance(s), s, 0});
      }
    }
  } else {
    const auto cands = candidates(query, params.radius, allow);
    scored.reserve(cands.size());
    for (const auto& c : cands) scored.push_back({distance(c.slot), c.slot, c.matched});
  }

  const std::size_t budget = std::min(scored.size(), std::max(params.k, params.rerank_depth));
  const auto cmp = [this](const Scored& a, const Scored& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return ids_[a.slot] < ids_[b.slot];
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(budget),
                    scored.end(), cmp);

  if (exhaustive) {
    for (std::size_t i = 0; i < budget; ++i) {
      std::uint32_t matched = 0;
      for (std::size_t p = 0; p < m; ++p)
        matched += subcode_at(scored[i].slot, p) == query.extract(p * subcode_width_, subcode_width_);
      scored[i].matched = matched;
    }
  }

  std::vector<RankedHit> hits;
  hits.reserve(budget);
  for (std::size_t i = 0; i < budget; ++i) {
    hits.push_back({ids_[scored[i].slot], scored[i].distance, std::nullopt, scored[i].matched});
  }

  if (params.rerank_depth > 0 && query_embedding != nullptr) {
    const std::size_t depth = std::min(params.rerank_depth, hits.size());
    for (std::size_t i = 0; i < depth; ++i) {
      const auto* e = embedding_at(scored[i].slot);
      if (e == nullptr) continue;
      try {
        hits[i].cosine_score = cosine(*query_embedding, *e);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kDegenerateVector) throw;
      }
    }
    rerank_by_cosine(hits, depth);
  }
  if (hits.size() > params.k) hits.resize(params.k);
  return hits;
}

}  // namespace lookalike
