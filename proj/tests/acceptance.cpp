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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lookalike/error.hpp"
#include "lookalike/eval.hpp"
#include "lookalike/query_engine.hpp"
#include "lookalike/rolling_store.hpp"
#include "lookalike/rule_engine.hpp"
#include "lookalike/variant_candidates.hpp"
#include "support.hpp"

using namespace lookalike;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

const Timestamp kNow = testing::ts("2026-06-01T00:00:00Z");

// ---------------------------------------------------------------------------

Outcome pigeonhole() {
  std::size_t misses = 0, checked = 0, within = 0;
  const CodecConfig config{1, 64, 8, 0};
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Xoshiro256StarStar rng(1000 + trial);
    SubcodeIndex index(config);
    std::vector<BinaryCode> codes;
    // clumps of near codes so every radius has members
    while (codes.size() < 2000) {
      const BinaryCode base = testing::random_code(rng, 64);
      codes.push_back(base);
      for (int i = 0; i < 9 && codes.size() < 2000; ++i) codes.push_back(testing::perturb(base, rng, 1 + rng.below(7)));
    }
    for (std::size_t i = 0; i < codes.size(); ++i) index.insert("i" + std::to_string(i), codes[i]);
    for (int q = 0; q < 20; ++q) {
      const BinaryCode query = testing::perturb(codes[rng.below(codes.size())], rng, rng.below(6));
      for (std::size_t r : {1, 2, 3, 5}) {
        std::vector<bool> found(codes.size(), false);
        for (const auto& c : index.candidates(query, r)) found[c.slot] = true;
        for (std::size_t i = 0; i < codes.size(); ++i) {
          if (hamming(codes[i], query) > r) continue;
          ++within;
          if (!found[*index.find_slot("i" + std::to_string(i))]) ++misses;
        }
        ++checked;
      }
    }
  }
  return {misses == 0, std::to_string(checked) + " query/radius pairs, " + std::to_string(within) +
                           " in-radius items, " + std::to_string(misses) + " missed"};
}

// ---------------------------------------------------------------------------

Outcome search_exactness() {
  std::size_t mismatches = 0, prefix_violations = 0, queries = 0, nonempty = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    StoreConfig config;
    config.codec = CodecConfig{32, 128, 8, 50 + s};
    RollingStore store(config);
    NormalSampler normal(200 + s);
    Xoshiro256StarStar rng(300 + s);
    std::vector<std::vector<float>> centers;
    for (int c = 0; c < 50; ++c) centers.push_back(testing::random_vector(normal, 32));
    std::vector<testing::OracleItem> oracle;
    for (int i = 0; i < 1000; ++i) {
      auto v = centers[rng.below(centers.size())];
      for (auto& x : v) x += static_cast<float>(0.08 * normal.next());
      const auto rec = testing::record("s" + std::to_string(s) + "-" + std::to_string(i), "item", v,
                                       kNow - Days{static_cast<int>(rng.below(60))});
      store.ingest(rec, kNow);
      oracle.push_back({rec.id, store.codec().encode(rec.embedding)});
    }
    for (int q = 0; q < 20; ++q) {
      auto v = centers[rng.below(centers.size())];
      for (auto& x : v) x += static_cast<float>(0.05 * normal.next());
      Query query = Query::by_embedding(EmbeddingVector(v), SearchParams{10, 6, 0});
      query.threshold = 6;
      const auto page = run_query(store, query);
      const auto expected = testing::brute_force_rank(oracle, store.codec().encode(EmbeddingVector(v)), 10, 6);
      std::vector<std::pair<std::size_t, std::string>> got;
      for (const auto& h : page.hits) got.emplace_back(h.hit.hamming_distance, h.hit.id);
      if (got != expected) ++mismatches;
      if (!expected.empty()) ++nonempty;
      // without the threshold, the in-radius hits lead the page
      query.threshold.reset();
      const auto loose = run_query(store, query);
      std::size_t i = 0;
      while (i < loose.hits.size() && loose.hits[i].hit.hamming_distance <= 6) ++i;
      for (std::size_t j = i; j < loose.hits.size(); ++j)
        if (loose.hits[j].hit.hamming_distance <= 6) ++prefix_violations;
      if (std::min<std::size_t>(i, 10) != std::min<std::size_t>(expected.size(), 10)) ++prefix_violations;
      ++queries;
    }
  }
  return {mismatches == 0 && prefix_violations == 0 && nonempty > queries / 2,
          std::to_string(queries) + " queries (" + std::to_string(nonempty) + " with in-radius hits), " +
              std::to_string(mismatches) + " mismatches, " + std::to_string(prefix_violations) + " prefix violations"};
}

// ---------------------------------------------------------------------------

Outcome subcoding_quality() {
  BenchSpec spec;
  spec.corpus.clusters = 100;
  spec.corpus.cluster_size = 20;
  spec.corpus.dim = 512;
  spec.corpus.seed = 11;
  spec.code_bits = {512, 256};
  spec.subcode_count = 16;
  spec.k = 1000;
  const auto report = run_bench(spec);
  const auto& q512 = report.quality[0].second;
  const auto& q256 = report.quality[1].second;
  const double ratio = q256.map10 / q512.map10;
  std::ostringstream detail;
  detail << "MAP@10 512=" << fmt("%.4f", q512.map10) << " 256=" << fmt("%.4f", q256.map10)
         << " R-prec 512=" << fmt("%.4f", q512.mean_r_precision) << " 256=" << fmt("%.4f", q256.mean_r_precision)
         << "; ratio " << fmt("%.4f", ratio) << " (drop " << fmt("%.2f", 100.0 * (1.0 - ratio))
         << "%; reference figure ~2%)";
  return {q512.evaluated == 100 && ratio >= 0.90, detail.str()};
}

// ---------------------------------------------------------------------------

SyntheticCorpus large_corpus(std::size_t items, std::size_t dim, double filter_fraction, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.clusters = items / 20;
  spec.cluster_size = 20;
  spec.dim = dim;
  spec.noise = 1.0;
  spec.filter_term = "lamp";
  spec.filter_fraction = filter_fraction;
  spec.seed = seed;
  return make_synthetic_corpus(spec);
}

std::unique_ptr<RollingStore> code_store(const SyntheticCorpus& corpus, std::size_t dim, std::size_t bits) {
  StoreConfig config;
  config.codec = CodecConfig{dim, bits, 16, 7};
  config.store_embeddings = false;
  config.window = Days{90};
  return build_store(config, corpus.records, SyntheticSpec{}.base_time);
}

double mean_query_ms(const RollingStore& store, const std::vector<Query>& queries) {
  const auto result = batch_query(store, queries);
  for (const auto& o : result.outcomes)
    if (!o.ok()) throw Error(o.error_code.value_or(ErrorCode::kInvalidArgument), o.error_message);
  return result.latency.mean_ms;
}

Outcome latency_trend() {
  const auto corpus = large_corpus(100000, 128, 0.0, 21);
  std::vector<Query> queries;
  Xoshiro256StarStar rng(5);
  for (int i = 0; i < 200; ++i)
    queries.push_back(Query::by_item(corpus.records[rng.below(corpus.records.size())].id, SearchParams{1000, 16, 0}));
  double ms[2];
  const std::size_t bits[2] = {512, 256};
  for (int b = 0; b < 2; ++b) {
    const auto store = code_store(corpus, 128, bits[b]);
    mean_query_ms(*store, std::vector<Query>(queries.begin(), queries.begin() + 10));  // warm-up
    ms[b] = mean_query_ms(*store, queries);
  }
  const double reduction = 100.0 * (1.0 - ms[1] / ms[0]);
  return {ms[1] < ms[0], "mean ms B=512 " + fmt("%.3f", ms[0]) + ", B=256 " + fmt("%.3f", ms[1]) + "; reduction " +
                             fmt("%.1f", reduction) + "% (reference figures 70% / 20%)"};
}

// ---------------------------------------------------------------------------

Outcome prefilter_speedup() {
  std::vector<FilterLatencyRow> rows;
  TextPredicate lamp;
  lamp.add_clause({"lamp"});
  for (std::size_t n : {25000, 50000, 100000}) {
    const auto corpus = large_corpus(n, 64, 0.10, 31 + n);
    const auto store = code_store(corpus, 64, 256);
    Xoshiro256StarStar rng(n);
    std::vector<Query> plain, filtered;
    for (int i = 0; i < 200; ++i) {
      Query q = Query::by_item(corpus.records[rng.below(corpus.records.size())].id, SearchParams{100, 16, 0});
      plain.push_back(q);
      q.predicate = lamp;
      filtered.push_back(q);
    }
    mean_query_ms(*store, std::vector<Query>(plain.begin(), plain.begin() + 10));
    FilterLatencyRow row;
    row.index_size = n;
    row.without_filter_ms = mean_query_ms(*store, plain);
    row.with_filter_ms = mean_query_ms(*store, filtered);
    rows.push_back(row);
  }
  bool gap_grows = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double prev = rows[i - 1].without_filter_ms - rows[i - 1].with_filter_ms;
    const double cur = rows[i].without_filter_ms - rows[i].with_filter_ms;
    gap_grows = gap_grows && cur >= prev;
  }
  std::ostringstream detail;
  for (const auto& r : rows)
    detail << r.index_size << ": " << fmt("%.3f", r.with_filter_ms) << " vs " << fmt("%.3f", r.without_filter_ms)
           << " ms; ";
  detail << (gap_grows ? "gap non-decreasing" : "gap shrank");
  return {rows.back().with_filter_ms < rows.back().without_filter_ms && gap_grows, detail.str()};
}

// ---------------------------------------------------------------------------

Outcome rolling_window() {
  std::size_t violations = 0, lost = 0, accepted_stale = 0, checks = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    StoreConfig config;
    config.codec = CodecConfig{8, 64, 8, 1};
    config.window = Days{static_cast<int>(10 + trial)};
    config.granularity = Days{static_cast<int>(1 + trial % 7)};
    RollingStore store(config);
    NormalSampler normal(trial);
    Xoshiro256StarStar rng(trial);
    std::vector<IngestRecord> kept;
    Timestamp now = kNow;
    for (int step = 0; step < 10; ++step) {
      now += std::chrono::hours{static_cast<int>(rng.below(24 * 5))};
      for (int i = 0; i < 40; ++i) {
        const auto age = std::chrono::seconds{static_cast<std::int64_t>(rng.below(86400ULL * 2 * config.window.count()))};
        const auto rec = testing::record("t" + std::to_string(step) + "-" + std::to_string(i), "x",
                                         testing::random_vector(normal, 8), now - age);
        const bool stale = rec.timestamp < now - config.window;
        try {
          store.ingest(rec, now);
          if (stale) ++accepted_stale;
          kept.push_back(rec);
        } catch (const Error& e) {
          if (!stale || e.code() != ErrorCode::kOutOfWindow) ++accepted_stale;
        }
      }
      store.expire(now);
      const Timestamp floor = now - config.window - config.granularity;
      std::set<std::string> visible;
      for (int q = 0; q < 5; ++q) {
        const auto page = run_query(store, Query::by_embedding(EmbeddingVector(testing::random_vector(normal, 8)),
                                                               SearchParams{100000, 8, 0}));
        for (const auto& h : page.hits) {
          if (h.timestamp < floor) ++violations;
          visible.insert(h.hit.id);
        }
      }
      for (const auto& r : kept) {
        const bool present = store.read().find(r.id).has_value();
        if (present && r.timestamp < floor) ++violations;
        if (!present && r.timestamp >= now - config.window) ++lost;
        if (present != (visible.count(r.id) > 0)) ++violations;
      }
      ++checks;
    }
  }
  return {violations == 0 && lost == 0 && accepted_stale == 0,
          std::to_string(checks) + " expiry checks, " + std::to_string(violations) + " stale hits, " +
              std::to_string(lost) + " in-window items lost, " + std::to_string(accepted_stale) +
              " out-of-window ingests accepted"};
}

// ---------------------------------------------------------------------------

double naive_ap(const std::vector<std::string>& ranked, const RelevantSet& rel, std::size_t k) {
  double sum = 0;
  for (std::size_t i = 1; i <= std::min(k, ranked.size()); ++i) {
    if (!rel.count(ranked[i - 1])) continue;
    double hits = 0;
    for (std::size_t j = 0; j < i; ++j) hits += rel.count(ranked[j]) ? 1 : 0;
    sum += hits / static_cast<double>(i);
  }
  return sum / static_cast<double>(std::min(rel.size(), k));
}

double naive_recall(const std::vector<std::string>& ranked, const RelevantSet& rel, std::size_t cutoff) {
  double hits = 0;
  for (std::size_t i = 0; i < std::min(cutoff, ranked.size()); ++i) hits += rel.count(ranked[i]) ? 1 : 0;
  return hits / static_cast<double>(rel.size());
}

Outcome metrics() {
  std::size_t bad = 0;
  auto close = [&](double a, double b) {
    if (std::fabs(a - b) > 1e-12) ++bad;
  };
  Xoshiro256StarStar rng(99);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t universe = 2 + rng.below(60);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < universe; ++i) ids.push_back("d" + std::to_string(i));
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
    const std::vector<std::string> ranked(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(rng.below(universe + 1)));
    RelevantSet rel;
    for (const auto& id : ids)
      if (rng.below(4) == 0) rel.insert(id);
    if (rel.empty()) rel.insert(ids[rng.below(ids.size())]);
    for (std::size_t k : {1, 3, 5, 10, 1000}) close(average_precision_at_k(ranked, rel, k), naive_ap(ranked, rel, k));
    close(r_precision(ranked, rel), naive_recall(ranked, rel, rel.size()));
    close(recall_at(ranked, rel, 1000), naive_recall(ranked, rel, 1000));
  }
  const bool rp = r_precision({"a", "x", "b", "c", "y", "z"}, {"a", "b", "c", "d"}) == 0.75;
  const bool ap = average_precision_at_k({"r1", "n", "r2"}, {"r1", "r2"}, 3) == (1.0 + 2.0 / 3.0) / 2.0;
  return {bad == 0 && rp && ap, "1000 instances, " + std::to_string(bad) + " deviations; worked examples " +
                                    (rp && ap ? "exact" : "wrong")};
}

// ---------------------------------------------------------------------------

Outcome suggestion_of_suggestions() {
  SyntheticSpec spec;
  spec.clusters = 0;
  spec.variant_groups = 500;
  spec.group_size = 10;
  spec.paraphrase_rate = 0.5;
  spec.dim = 128;
  spec.seed = 41;
  const auto corpus = make_synthetic_corpus(spec);
  StoreConfig config;
  config.codec = CodecConfig{128, 256, 16, 7};
  const auto store = build_store(config, corpus.records, spec.base_time);
  const std::vector<std::size_t> n_grid{100, 200}, k_grid{0, 2};
  const auto curve = recall_curve(*store, corpus.groups, n_grid, k_grid, 16);
  auto row = [&](std::size_t n, std::size_t k) -> const RecallRow& {
    return *std::find_if(curve.rows.begin(), curve.rows.end(), [&](const RecallRow& r) { return r.n == n && r.k == k; });
  };
  std::size_t pointwise = 0;
  for (const auto& q : curve.per_query_recall) {
    // cells: (100,0) (100,2) (200,0) (200,2)
    if (q[1] < q[0] || q[3] < q[2]) ++pointwise;
  }
  const auto& t100 = row(100, 0);
  const auto& u100 = row(100, 2);
  const auto& t200 = row(200, 0);
  const auto& u200 = row(200, 2);
  const bool beats = u100.mean_recall > t200.mean_recall;
  const bool budget = u100.mean_candidates < 3.0 * 100 && u200.mean_candidates < 3.0 * 200;
  std::ostringstream detail;
  detail << curve.queries << " queries; recall text N=100 " << fmt("%.4f", t100.mean_recall) << ", N=200 "
         << fmt("%.4f", t200.mean_recall) << "; union(100,2) " << fmt("%.4f", u100.mean_recall) << " with "
         << fmt("%.1f", u100.mean_candidates) << " candidates, union(200,2) " << fmt("%.4f", u200.mean_recall)
         << "; lift over text at N=100 " << fmt("%.1f", 100.0 * (u100.mean_recall / t100.mean_recall - 1.0))
         << "%, at N=200 " << fmt("%.1f", 100.0 * (u200.mean_recall / t200.mean_recall - 1.0))
         << "% (reference 13% / 24%); pointwise violations " << pointwise;
  return {pointwise == 0 && beats && budget, detail.str()};
}

// ---------------------------------------------------------------------------

Outcome rule_consistency() {
  StoreConfig config;
  config.codec = CodecConfig{32, 128, 8, 3};
  RollingStore sample(config);
  const Codec& codec = sample.codec();
  NormalSampler normal(61);
  Xoshiro256StarStar rng(62);
  std::vector<IngestRecord> seeds, records;
  std::vector<std::set<std::string>> planted(4);
  const char* titles[] = {"vape starter kit", "e-cigarette refill", "garden hose", "ceramic mug", "vape case"};
  for (int s = 0; s < 4; ++s)
    seeds.push_back(testing::record("seed" + std::to_string(s), "seed", testing::random_vector(normal, 32), kNow));
  for (int s = 0; s < 4; ++s) {
    const BinaryCode seed_code = codec.encode(seeds[s].embedding);
    for (int i = 0; i < 50;) {
      auto v = std::vector<float>(seeds[s].embedding.values().begin(), seeds[s].embedding.values().end());
      for (auto& x : v) x += static_cast<float>(0.01 * normal.next());
      auto r = testing::record("p" + std::to_string(s) + "-" + std::to_string(i), titles[i % 5], v, kNow - Days{i % 30});
      if (hamming(codec.encode(r.embedding), seed_code) > 2) continue;
      planted[s].insert(r.id);
      records.push_back(std::move(r));
      ++i;
    }
  }
  while (records.size() < 10000) {
    const std::size_t i = records.size();
    records.push_back(testing::record("b" + std::to_string(i), titles[i % 5], testing::random_vector(normal, 32),
                                      kNow - Days{static_cast<int>(i % 60)}));
  }
  for (const auto& r : records) sample.ingest(r, kNow);
  // background items that happen to fall within 2 bits of a seed are planted too
  std::vector<BinaryCode> codes;
  for (const auto& r : records) codes.push_back(codec.encode(r.embedding));

  std::size_t disagreements = 0, total_hits = 0;
  for (int t = 0; t < 20; ++t) {
    Rule rule;
    rule.id = "r" + std::to_string(t);
    const std::size_t nseeds = 1 + rng.below(2);
    for (std::size_t s = 0; s < nseeds; ++s) {
      const auto& seed = seeds[rng.below(seeds.size())];
      rule.seeds.push_back(Seed{seed.id, seed.embedding, codec.encode(seed.embedding)});
    }
    if (t % 4 == 3) rule.threshold = CosineFloor{0.6 + 0.4 * rng.uniform()};
    else rule.threshold = HammingThreshold{rng.below(40)};
    rule.combine = static_cast<CombineMode>(rng.below(3));
    if (rng.below(2)) rule.predicate = TextPredicate({{"vape"}, {"ecigarette"}});
    std::set<std::string> expected, got;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (evaluate_rule(rule, codes[i], &records[i].embedding, tokenize(records[i].title)).flagged)
        expected.insert(records[i].id);
    for (const auto& h : simulation_hits(rule, sample)) got.insert(h.id);
    if (got != expected) ++disagreements;
    total_hits += got.size();
  }

  std::vector<Rule> rules;
  for (int s = 0; s < 4; ++s) {
    Rule r;
    r.id = "planted" + std::to_string(s);
    r.seeds.push_back(Seed{seeds[s].id, seeds[s].embedding, codec.encode(seeds[s].embedding)});
    r.threshold = HammingThreshold{2};
    r.combine = CombineMode::kImageOnly;
    r.status = RuleStatus::kFinalized;
    rules.push_back(r);
    for (std::size_t i = 0; i < records.size(); ++i)
      if (hamming(codes[i], r.seeds[0].code) <= 2) planted[s].insert(records[i].id);
  }
  std::vector<std::string> lines;
  for (const auto& r : records) lines.push_back(nlohmann::json(r).dump());
  JsonlRecordSource source(std::move(lines));
  const auto report = sweep(rules, codec, source);
  std::size_t sweep_errors = 0;
  for (int s = 0; s < 4; ++s) {
    std::set<std::string> flagged;
    for (const auto& f : report.flagged)
      if (f.rule_id == rules[s].id) flagged.insert(f.item_id);
    if (flagged != planted[s]) ++sweep_errors;
  }
  return {disagreements == 0 && sweep_errors == 0,
          "20 rules over " + std::to_string(records.size()) + " records (" + std::to_string(total_hits) +
              " hits), " + std::to_string(disagreements) + " disagreements; planted sweep " +
              std::to_string(sweep_errors) + " rules off"};
}

// ---------------------------------------------------------------------------

Outcome persistence() {
  testing::TempDir dir;
  StoreConfig config;
  config.codec = CodecConfig{32, 128, 8, 9};
  config.granularity = Days{7};
  RollingStore store(config);
  NormalSampler normal(71);
  for (int i = 0; i < 600; ++i) {
    store.ingest(testing::record("k" + std::to_string(i), i % 4 ? "lamp shade" : "desk", testing::random_vector(normal, 32),
                                 kNow - Days{(i % 3) * 7}),
                 kNow);
  }
  store.persist(dir.path());
  const auto loaded = RollingStore::load(dir.path(), config);
  std::size_t differences = 0;
  Xoshiro256StarStar rng(72);
  for (int q = 0; q < 20; ++q) {
    Query query = q % 2 ? Query::by_item("k" + std::to_string(rng.below(600)), SearchParams{25, 4, 10})
                        : Query::by_embedding(EmbeddingVector(testing::random_vector(normal, 32)), SearchParams{25, 8, 0});
    if (q % 5 == 0) query.predicate = TextPredicate({{"lamp"}});
    if (page_hits_json(run_query(store, query)) != page_hits_json(run_query(*loaded, query))) ++differences;
  }
  const bool shape = store.segment_count() == 3 && loaded->segment_count() == 3 &&
                     loaded->item_count() == store.item_count();
  return {differences == 0 && shape, std::to_string(loaded->segment_count()) + " segments, " +
                                         std::to_string(loaded->item_count()) + " items, 20 probes, " +
                                         std::to_string(differences) + " differences"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"pigeonhole completeness", 10, pigeonhole},
      {"search exactness", 30, search_exactness},
      {"subcoding quality", 300, subcoding_quality},
      {"latency trend", 600, latency_trend},
      {"text prefilter speedup", 600, prefilter_speedup},
      {"rolling window", 5, rolling_window},
      {"metrics correctness", 5, metrics},
      {"suggestion of suggestions", 300, suggestion_of_suggestions},
      {"rule engine consistency", 120, rule_consistency},
      {"persistence round trip", 60, persistence},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = seconds_since(start);
    const bool in_time = elapsed < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s %s: %s [%.2f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(),
                elapsed, c.budget_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
