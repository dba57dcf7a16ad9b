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

#include "lookalike/variant_candidates.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <unordered_set>

#include "lookalike/error.hpp"
#include "lookalike/query_engine.hpp"

namespace lookalike {

VariantContext::VariantContext(const RollingStore& store) : store_(store) {
  const auto view = store.read();
  for (const auto& [bucket, segment] : view.segments()) {
    for (Slot s : segment.index().live_slots()) {
      const auto& id = segment.index().id_at(s);
      corpus_.add(id, segment.info(s).tokens);
      titles_.emplace(id, segment.info(s).title);
    }
  }
  corpus_.finalize();
}

const std::vector<std::string>& VariantContext::neighbors(const std::string& id, std::size_t k,
                                                          std::size_t radius) {
  auto& cached = neighbor_cache_[id];
  // One extra slot absorbs the query item, which callers drop.
  const std::size_t depth = k + 1;
  if (cached.depth >= depth && cached.radius == radius) return cached.ids;

  SearchParams params;
  params.k = depth + 1;  // the reference item itself comes back too
  params.radius = radius;
  const ResultPage page = run_query(store_, Query::by_item(id, params));
  cached.ids.clear();
  for (const auto& hit : page.hits) {
    if (hit.hit.id != id) cached.ids.push_back(hit.hit.id);
  }
  if (cached.ids.size() > depth) cached.ids.resize(depth);
  cached.depth = depth;
  cached.radius = radius;
  return cached.ids;
}

std::vector<TextHit> VariantContext::text_stage(const std::string& query_id, std::size_t n) const {
  const auto title = titles_.find(query_id);
  if (title == titles_.end()) throw Error(ErrorCode::kNotFound, "item '" + query_id + "' is not indexed");
  if (n == 0) return {};
  return corpus_.top(tokenize(title->second), n, query_id);
}

CandidateSet VariantContext::expand(const std::string& query_id, std::span<const TextHit> text_hits,
                                    std::size_t k, std::size_t radius) {
  CandidateSet out;
  out.query_id = query_id;
  for (const auto& hit : text_hits) out.entries[hit.id] |= kFromText;
  if (k == 0) return out;
  for (const auto& hit : text_hits) {
    std::size_t added = 0;
    for (const auto& neighbor : neighbors(hit.id, k, radius)) {
      if (added == k) break;
      if (neighbor == query_id) continue;
      out.entries[neighbor] |= kFromImage;
      ++added;
    }
  }
  return out;
}

CandidateSet VariantContext::generate(const std::string& query_id, const SoSParams& p) {
  const auto text_hits = text_stage(query_id, p.text_candidates);
  return expand(query_id, text_hits, p.image_neighbors, p.radius);
}

void to_json(nlohmann::json& j, const CandidateSet& c) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [id, bits] : c.entries)
    list.push_back({{"id", id}, {"from_text", (bits & kFromText) != 0}, {"from_image", (bits & kFromImage) != 0}});
  j = {{"query_id", c.query_id}, {"candidates", std::move(list)}};
}

CandidateSet generate_candidates(const RollingStore& store, const std::string& query_id, const SoSParams& p) {
  VariantContext context(store);
  return context.generate(query_id, p);
}

std::vector<VariantGroup> read_groups(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open groups file " + path.string());
  std::vector<VariantGroup> groups;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      groups.push_back({j.at("group_id").get<std::string>(), j.at("member_ids").get<std::vector<std::string>>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return groups;
}

void write_groups(const std::filesystem::path& path, const std::vector<VariantGroup>& groups) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& g : groups) {
    out << nlohmann::json{{"group_id", g.group_id}, {"member_ids", g.member_ids}}.dump() << "\n";
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

RecallCurve recall_curve(const RollingStore& store, const std::vector<VariantGroup>& groups,
                         const std::vector<std::size_t>& n_grid, const std::vector<std::size_t>& k_grid,
                         std::size_t radius) {
  RecallCurve curve;
  for (std::size_t n : n_grid) {
    for (std::size_t k : k_grid) curve.rows.push_back({n, k, 0.0, 0.0});
  }
  VariantContext context(store);
  const std::size_t max_n = n_grid.empty() ? 0 : *std::max_element(n_grid.begin(), n_grid.end());
  for (const auto& group : groups) {
    if (group.member_ids.size() < 2) {
      ++curve.skipped_singletons;
      continue;
    }
    for (const auto& query : group.member_ids) {
      std::unordered_set<std::string> relevant(group.member_ids.begin(), group.member_ids.end());
      relevant.erase(query);
      std::vector<double> recalls;
      recalls.reserve(curve.rows.size());
      const auto text_hits = context.text_stage(query, max_n);
      for (auto& row : curve.rows) {
        const auto prefix = std::span<const TextHit>(text_hits).first(std::min(row.n, text_hits.size()));
        const CandidateSet c = context.expand(query, prefix, row.k, radius);
        std::size_t found = 0;
        for (const auto& id : relevant) found += c.contains(id);
        const double recall = static_cast<double>(found) / static_cast<double>(relevant.size());
        row.mean_recall += recall;
        row.mean_candidates += static_cast<double>(c.size());
        recalls.push_back(recall);
      }
      curve.per_query_recall.push_back(std::move(recalls));
      ++curve.queries;
    }
  }
  if (curve.queries > 0) {
    for (auto& row : curve.rows) {
      row.mean_recall /= static_cast<double>(curve.queries);
      row.mean_candidates /= static_cast<double>(curve.queries);
    }
  }
  return curve;
}

void to_json(nlohmann::json& j, const RecallCurve& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : c.rows)
    rows.push_back({{"N", r.n}, {"k", r.k}, {"mean_recall", r.mean_recall}, {"mean_candidates", r.mean_candidates}});
  j = {{"queries", c.queries}, {"skipped_singletons", c.skipped_singletons}, {"rows", std::move(rows)}};
}

void write_recall_csv(std::ostream& out, const RecallCurve& curve) {
  out << "N,k,mean_recall,mean_candidates\n";
  out << std::fixed;
  for (const auto& row : curve.rows) {
    out << row.n << "," << row.k << "," << std::setprecision(6) << row.mean_recall << ","
        << std::setprecision(3) << row.mean_candidates << "\n";
  }
}

}  // namespace lookalike
