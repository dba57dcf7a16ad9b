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

#include "lookalike/query_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace lookalike {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

std::size_t similarity_to_threshold(double similarity, std::size_t code_bits) {
  const double clamped = std::clamp(similarity, 0.0, 1.0);
  return static_cast<std::size_t>(std::llround((1.0 - clamped) * static_cast<double>(code_bits)));
}

std::vector<std::string> ResultPage::ids() const {
  std::vector<std::string> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.hit.id);
  return out;
}

void to_json(nlohmann::json& j, const PageHit& h) {
  j = nlohmann::json{{"id", h.hit.id},
                     {"hamming_distance", h.hit.hamming_distance},
                     {"matched_subcodes", h.hit.matched_subcodes},
                     {"cosine_score", nullptr},
                     {"product_id", h.product_id},
                     {"title", h.title},
                     {"timestamp", format_timestamp(h.timestamp)}};
  if (h.hit.cosine_score) j["cosine_score"] = *h.hit.cosine_score;
}

nlohmann::json page_hits_json(const ResultPage& page) {
  return nlohmann::json{{"hits", page.hits}};
}

void to_json(nlohmann::json& j, const ResultPage& page) {
  j = page_hits_json(page);
  j["timings"] = {{"prefilter_ms", page.timings.prefilter_ms},
                  {"candidate_ms", page.timings.candidate_ms},
                  {"rerank_ms", page.timings.rerank_ms},
                  {"total_ms", page.timings.total_ms}};
}

ResultPage run_query(const RollingStore::ReadView& view, const Query& q) {
  const auto start = Clock::now();
  const Codec& codec = view.codec();
  if (q.threshold && *q.threshold > codec.config().code_bits) {
    throw Error(ErrorCode::kInvalidArgument, "threshold exceeds code length");
  }

  BinaryCode code;
  const EmbeddingVector* query_embedding = nullptr;
  if (const auto* embedding = std::get_if<EmbeddingVector>(&q.target)) {
    code = codec.encode(*embedding);
    query_embedding = embedding;
  } else {
    const auto& id = std::get<std::string>(q.target);
    const auto loc = view.find(id);
    if (!loc) throw Error(ErrorCode::kNotFound, "item '" + id + "' is not in any live segment");
    code = loc->segment->index().code_at(loc->slot);
    query_embedding = loc->segment->index().embedding_at(loc->slot);
  }

  ResultPage page;
  const std::size_t budget = std::max(q.params.k, q.params.rerank_depth);
  SearchParams per_segment = q.params;
  per_segment.k = budget;
  per_segment.rerank_depth = 0;

  struct Merged {
    RankedHit hit;
    const Segment* segment;
  };
  std::vector<Merged> merged;
  for (const auto& [bucket, segment] : view.segments()) {
    std::optional<AllowList> allow;
    if (q.predicate) {
      const auto t0 = Clock::now();
      allow = segment.prefilter(*q.predicate);
      page.timings.prefilter_ms += elapsed_ms(t0);
      if (allow->count() == 0) continue;
    }
    const auto t1 = Clock::now();
    auto hits = segment.index().search(code, per_segment, allow ? &*allow : nullptr);
    page.timings.candidate_ms += elapsed_ms(t1);
    for (auto& h : hits) merged.push_back({std::move(h), &segment});
  }

  const auto t2 = Clock::now();
  std::sort(merged.begin(), merged.end(),
            [](const Merged& a, const Merged& b) { return hamming_order(a.hit, b.hit); });
  if (q.threshold) {
    std::erase_if(merged, [&](const Merged& m) { return m.hit.hamming_distance > *q.threshold; });
  }
  if (merged.size() > budget) merged.resize(budget);

  if (q.params.rerank_depth > 0 && query_embedding != nullptr) {
    const std::size_t depth = std::min(q.params.rerank_depth, merged.size());
    for (std::size_t i = 0; i < depth; ++i) {
      const auto& index = merged[i].segment->index();
      const auto* e = index.embedding_at(*index.find_slot(merged[i].hit.id));
      if (e == nullptr) continue;
      try {
        merged[i].hit.cosine_score = cosine(*query_embedding, *e);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kDegenerateVector) throw;
      }
    }
    std::stable_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(depth),
                     [](const Merged& a, const Merged& b) { return cosine_order(a.hit, b.hit); });
  }
  if (merged.size() > q.params.k) merged.resize(q.params.k);

  page.hits.reserve(merged.size());
  for (auto& m : merged) {
    const Slot slot = *m.segment->index().find_slot(m.hit.id);
    const ItemInfo& info = m.segment->info(slot);
    page.hits.push_back({std::move(m.hit), info.product_id, info.title, info.timestamp});
  }
  page.timings.rerank_ms = elapsed_ms(t2);
  page.timings.total_ms = elapsed_ms(start);
  return page;
}

ResultPage run_query(const RollingStore& store, const Query& q) { return run_query(store.read(), q); }

LatencySummary LatencySummary::from(const std::vector<double>& samples_ms) {
  LatencySummary s;
  s.count = samples_ms.size();
  if (samples_ms.empty()) return s;
  s.min_ms = *std::min_element(samples_ms.begin(), samples_ms.end());
  s.max_ms = *std::max_element(samples_ms.begin(), samples_ms.end());
  for (double x : samples_ms) s.total_ms += x;
  s.mean_ms = std::clamp(s.total_ms / static_cast<double>(s.count), s.min_ms, s.max_ms);
  return s;
}

BatchResult batch_query(const RollingStore& store, const std::vector<Query>& queries) {
  BatchResult result;
  result.outcomes.resize(queries.size());
  std::vector<double> samples;
  samples.reserve(queries.size());
  const auto view = store.read();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto& outcome = result.outcomes[i];
    const auto start = Clock::now();
    try {
      outcome.page = run_query(view, queries[i]);
    } catch (const Error& e) {
      outcome.error_code = e.code();
      outcome.error_message = e.what();
    }
    outcome.wall_ms = elapsed_ms(start);
    if (outcome.ok()) samples.push_back(outcome.wall_ms);
  }
  result.latency = LatencySummary::from(samples);
  return result;
}

}  // namespace lookalike
