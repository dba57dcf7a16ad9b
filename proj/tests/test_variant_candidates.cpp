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

#include <sstream>

#include "doctest.h"
#include "lookalike/error.hpp"
#include "lookalike/eval.hpp"
#include "lookalike/variant_candidates.hpp"
#include "support.hpp"

using namespace lookalike;
using testing::ts;

namespace {

const Timestamp kNow = ts("2026-04-01T00:00:00Z");

StoreConfig config() {
  StoreConfig c;
  c.codec = CodecConfig{32, 128, 8, 2};
  return c;
}

std::vector<float> near(const std::vector<float>& v, NormalSampler& normal, double noise) {
  auto out = v;
  for (auto& x : out) x += static_cast<float>(noise * normal.next());
  return out;
}

/// q and s share a title family; v looks like s but its title shares nothing.
std::unique_ptr<RollingStore> scenario_store() {
  auto store = std::make_unique<RollingStore>(config());
  NormalSampler normal(1);
  const auto image_q = testing::random_vector(normal, 32);
  const auto image_s = testing::random_vector(normal, 32);
  store->ingest(testing::record("q", "acme blender red 500w", image_q, kNow), kNow);
  store->ingest(testing::record("s", "acme blender blue 500w", image_s, kNow), kNow);
  store->ingest(testing::record("v", "countertop mixing appliance", near(image_s, normal, 0.01), kNow), kNow);
  const char* fillers[] = {"garden hose", "desk lamp", "running shoe", "coffee mug", "phone case", "acme toaster"};
  int i = 0;
  for (const char* title : fillers)
    store->ingest(testing::record("f" + std::to_string(i++), title, testing::random_vector(normal, 32), kNow), kNow);
  return store;
}

}  // namespace

TEST_CASE("image expansion recovers a paraphrased variant") {
  const auto store = scenario_store();
  VariantContext ctx(*store);
  const auto text = ctx.text_stage("q", 2);
  REQUIRE_FALSE(text.empty());
  CHECK(text[0].id == "s");

  const auto only_text = ctx.generate("q", SoSParams{2, 0, 8});
  CHECK_FALSE(only_text.contains("v"));
  CHECK_FALSE(only_text.contains("q"));
  for (const auto& [id, bits] : only_text.entries) CHECK(bits == kFromText);
  CHECK(only_text.size() == 2);

  const auto expanded = ctx.generate("q", SoSParams{2, 1, 8});
  REQUIRE(expanded.contains("v"));
  CHECK(expanded.entries.at("v") == kFromImage);
  CHECK((expanded.entries.at("s") & kFromText) != 0);
  CHECK(expanded.size() <= 2 * (1 + 1));
  CHECK_FALSE(expanded.contains("q"));

  CHECK(ctx.generate("q", SoSParams{0, 3, 8}).size() == 0);
  CHECK_THROWS_AS(ctx.generate("nope", SoSParams{}), Error);

  const nlohmann::json j = expanded;
  CHECK(j.at("query_id") == "q");
  CHECK(j.at("candidates").size() == expanded.size());
}

TEST_CASE("recall curve basics") {
  const auto store = scenario_store();
  const std::vector<VariantGroup> groups{{"g1", {"q", "s"}}, {"g2", {"f0"}}};
  const auto curve = recall_curve(*store, groups, {1, 2}, {0, 1}, 8);
  CHECK(curve.skipped_singletons == 1);
  CHECK(curve.queries == 2);
  REQUIRE(curve.rows.size() == 4);
  // q's partner s is text rank 1; s's partner q is too
  CHECK(curve.rows[0].n == 1);
  CHECK(curve.rows[0].k == 0);
  CHECK(curve.rows[0].mean_recall == 1.0);
  CHECK(curve.rows[0].mean_candidates == 1.0);
  std::ostringstream csv;
  write_recall_csv(csv, curve);
  CHECK(csv.str().rfind("N,k,mean_recall,mean_candidates\n", 0) == 0);
}

TEST_CASE("recall is monotone and bounded on a planted corpus") {
  SyntheticSpec spec;
  spec.clusters = 0;
  spec.dim = 32;
  spec.variant_groups = 40;
  spec.group_size = 6;
  spec.categories = 5;
  spec.seed = 9;
  const auto corpus = make_synthetic_corpus(spec);
  StoreConfig c = config();
  const auto store = build_store(c, corpus.records, spec.base_time);
  const std::vector<std::size_t> n_grid{5, 10, 20}, k_grid{0, 1, 2, 3};
  const auto curve = recall_curve(*store, corpus.groups, n_grid, k_grid, 8);
  REQUIRE(curve.rows.size() == 12);
  REQUIRE(curve.per_query_recall.size() == 240);
  for (const auto& row : curve.rows) CHECK(row.mean_candidates <= static_cast<double>(row.n * (1 + row.k)));
  for (const auto& per_query : curve.per_query_recall) {
    for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
      for (std::size_t ki = 0; ki < k_grid.size(); ++ki) {
        const double here = per_query[ni * k_grid.size() + ki];
        if (ki > 0) CHECK(here >= per_query[ni * k_grid.size() + ki - 1]);
        if (ni > 0) CHECK(here >= per_query[(ni - 1) * k_grid.size() + ki]);
      }
    }
  }
  // the same snapshot gives the same curve
  const auto again = recall_curve(*store, corpus.groups, n_grid, k_grid, 8);
  CHECK(again.per_query_recall == curve.per_query_recall);
}

TEST_CASE("groups file round trip") {
  testing::TempDir dir;
  const std::vector<VariantGroup> groups{{"g1", {"a", "b"}}, {"g2", {"c", "d", "e"}}};
  write_groups(dir / "groups.jsonl", groups);
  const auto back = read_groups(dir / "groups.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[1].group_id == "g2");
  CHECK(back[1].member_ids == std::vector<std::string>{"c", "d", "e"});
}
