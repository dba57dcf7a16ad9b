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

#include <algorithm>
#include <functional>
#include <optional>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "lookalike/error.hpp"
#include "lookalike/eval.hpp"
#include "support.hpp"

using namespace lookalike;

namespace {

std::vector<std::string> split(const std::string& s) {
  std::istringstream in(s);
  return {std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
}

RelevantSet rel(const std::string& s) {
  const auto v = split(s);
  return {v.begin(), v.end()};
}

std::optional<ErrorCode> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Straight-line reimplementation used as a cross-check.
double naive_ap(const std::vector<std::string>& ranked, const RelevantSet& relevant, std::size_t k) {
  double sum = 0;
  for (std::size_t i = 1; i <= k && i <= ranked.size(); ++i) {
    if (!relevant.count(ranked[i - 1])) continue;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < i; ++j) hits += relevant.count(ranked[j]) ? 1 : 0;
    sum += static_cast<double>(hits) / static_cast<double>(i);
  }
  return sum / static_cast<double>(std::min(relevant.size(), k));
}

double naive_recall(const std::vector<std::string>& ranked, const RelevantSet& relevant, std::size_t cutoff) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size() && i < cutoff; ++i) hits += relevant.count(ranked[i]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.clusters = 10;
  s.cluster_size = 5;
  s.dim = 32;
  s.noise = 0.3;
  s.seed = 4;
  return s;
}

StoreConfig store_config(std::size_t dim, std::size_t bits = 128) {
  StoreConfig c;
  c.codec = CodecConfig{dim, bits, 8, 3};
  c.window = Days{90};
  return c;
}

}  // namespace

TEST_CASE("worked metric examples") {
  const auto ranked = split("a x b c y z");
  const auto relevant = rel("a b c d");
  CHECK(r_precision(ranked, relevant) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(average_precision_at_k({"r1", "n", "r2"}, rel("r1 r2"), 3) == doctest::Approx(0.8333333333333333).epsilon(1e-12));
}

TEST_CASE("frozen metric values") {
  struct Case {
    std::string ranked, relevant;
    double rp, ap1, ap3, ap5, ap10, recall4;
  };
  const std::vector<Case> cases{
      {"a x b c y z", "a b c d", 0.75, 1.0, 0.5555555555555555, 0.6041666666666666, 0.6041666666666666, 0.75},
      {"r1 n r2", "r1 r2", 0.5, 1.0, 0.8333333333333333, 0.8333333333333333, 0.8333333333333333, 1.0},
      {"n1 n2 n3 a b", "a b", 0.0, 0.0, 0.0, 0.325, 0.325, 0.5},
      {"a b c d e f g h i j k l", "b d f h j l m", 0.42857142857142855, 0.0, 0.16666666666666666, 0.2,
       0.35714285714285715, 0.2857142857142857},
      {"q w e r t y u i o p", "p o i", 0.0, 0.0, 0.0, 0.0, 0.2157407407407407, 0.0},
  };
  for (const auto& c : cases) {
    CAPTURE(c.ranked);
    const auto ranked = split(c.ranked);
    const auto relevant = rel(c.relevant);
    CHECK(r_precision(ranked, relevant) == doctest::Approx(c.rp).epsilon(1e-14));
    CHECK(average_precision_at_k(ranked, relevant, 1) == doctest::Approx(c.ap1).epsilon(1e-14));
    CHECK(average_precision_at_k(ranked, relevant, 3) == doctest::Approx(c.ap3).epsilon(1e-14));
    CHECK(average_precision_at_k(ranked, relevant, 5) == doctest::Approx(c.ap5).epsilon(1e-14));
    CHECK(average_precision_at_k(ranked, relevant, 10) == doctest::Approx(c.ap10).epsilon(1e-14));
    CHECK(recall_at(ranked, relevant, 4) == doctest::Approx(c.recall4).epsilon(1e-14));
  }
}

TEST_CASE("metrics agree with a naive implementation on random instances") {
  Xoshiro256StarStar rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t universe = 5 + rng.next() % 40;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < universe; ++i) ids.push_back("i" + std::to_string(i));
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.next() % i]);
    const std::size_t len = rng.next() % (universe + 1);
    const std::vector<std::string> ranked(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(len));
    RelevantSet relevant;
    for (const auto& id : ids)
      if (rng.next() % 3 == 0) relevant.insert(id);
    if (relevant.empty()) relevant.insert(ids[0]);
    for (std::size_t k : {1, 5, 10}) {
      const double ap = average_precision_at_k(ranked, relevant, k);
      CHECK(ap == doctest::Approx(naive_ap(ranked, relevant, k)).epsilon(1e-12));
      CHECK(ap >= 0.0);
      CHECK(ap <= 1.0);
    }
    const double rp = r_precision(ranked, relevant);
    CHECK(rp == doctest::Approx(naive_recall(ranked, relevant, relevant.size())).epsilon(1e-12));
    CHECK(rp >= 0.0);
    CHECK(rp <= 1.0);
    CHECK(recall_at(ranked, relevant, 1000) == doctest::Approx(naive_recall(ranked, relevant, 1000)).epsilon(1e-12));
  }
}

TEST_CASE("metric edge cases") {
  CHECK(code_of([] { r_precision({"a"}, {}); }) == ErrorCode::kInvalidJudgment);
  CHECK(code_of([] { average_precision_at_k({"a"}, {}, 5); }) == ErrorCode::kInvalidJudgment);
  CHECK(code_of([] { recall_at({"a"}, {}); }) == ErrorCode::kInvalidJudgment);
  CHECK(code_of([] { average_precision_at_k({"a"}, rel("a"), 0); }) == ErrorCode::kInvalidArgument);
  CHECK(average_precision_at_k({}, rel("a"), 10) == 0.0);
  CHECK(recall_at({"a", "b"}, rel("a b"), 1) == 0.5);
}

TEST_CASE("judgments round trip") {
  testing::TempDir dir;
  std::vector<JudgedQuery> judged(2);
  judged[0].query_id = "q1";
  judged[0].relevant = rel("b a c");
  judged[1].query_id = "q2";
  judged[1].relevant = rel("z");
  write_judgments(dir / "j.jsonl", judged);
  CHECK(slurp(dir / "j.jsonl").rfind(R"({"query_id":"q1","relevant_ids":["a","b","c"]})", 0) == 0);
  const auto back = read_judgments(dir / "j.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].relevant == judged[0].relevant);
  CHECK(back[1].query_id == "q2");

  std::ofstream(dir / "bad.jsonl") << R"({"query_id":"q","relevant_ids":["q"]})" << '\n';
  CHECK(code_of([&] { read_judgments(dir / "bad.jsonl"); }) == ErrorCode::kInvalidJudgment);
}

TEST_CASE("synthetic corpus is deterministic") {
  const auto spec = small_spec();
  testing::TempDir a, b;
  write_synthetic_corpus(a.path(), make_synthetic_corpus(spec), spec.dim);
  write_synthetic_corpus(b.path(), make_synthetic_corpus(spec), spec.dim);
  for (const char* f : {"vectors.sirv", "meta.jsonl", "judgments.jsonl"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  auto other = spec;
  other.seed = 5;
  testing::TempDir c;
  write_synthetic_corpus(c.path(), make_synthetic_corpus(other), spec.dim);
  CHECK(slurp(a / "vectors.sirv") != slurp(c / "vectors.sirv"));
}

TEST_CASE("synthetic corpus shape") {
  auto spec = small_spec();
  spec.noise = 0.0;
  const auto corpus = make_synthetic_corpus(spec);
  REQUIRE(corpus.records.size() == 50);
  REQUIRE(corpus.judgments.size() == 10);
  for (const auto& j : corpus.judgments) CHECK(j.relevant.size() == 4);
  const Codec codec(CodecConfig{32, 128, 8, 1});
  // zero noise collapses every cluster onto its center
  for (std::size_t c = 0; c < 10; ++c) {
    const auto first = codec.encode(corpus.records[c * 5].embedding);
    for (std::size_t i = 1; i < 5; ++i) CHECK(hamming(first, codec.encode(corpus.records[c * 5 + i].embedding)) == 0);
  }

  spec = small_spec();
  spec.clusters = 40;
  spec.filter_fraction = 0.1;
  const auto filtered = make_synthetic_corpus(spec);
  CHECK(filtered.filter_matches.size() == 20);
  std::size_t with_term = 0;
  for (const auto& r : filtered.records) {
    with_term += tokenize(r.title).contains("lamp") ? 1 : 0;
  }
  CHECK(with_term == 20);

  auto bad = small_spec();
  bad.cluster_size = 1;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kInvalidConfig);
  bad = small_spec();
  bad.noise = -1;
  CHECK(code_of([&] { make_synthetic_corpus(bad); }) == ErrorCode::kInvalidConfig);
  bad = small_spec();
  bad.clusters = 0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("benchmark over exact duplicates is perfect") {
  auto spec = small_spec();
  spec.noise = 0.0;
  const auto corpus = make_synthetic_corpus(spec);
  const auto store = build_store(store_config(32), corpus.records, spec.base_time);
  BenchmarkParams params;
  params.search = SearchParams{10, 0, 0};
  const auto result = run_benchmark(*store, corpus.judgments, params);
  CHECK(result.metrics.evaluated == 10);
  CHECK(result.metrics.failed == 0);
  CHECK(result.metrics.map1 == 1.0);
  CHECK(result.metrics.map10 == 1.0);
  CHECK(result.metrics.mean_r_precision == 1.0);
  CHECK(result.metrics.recall_1000 == 1.0);
  for (const auto& q : result.metrics.per_query) CHECK_FALSE(q.error.has_value());
}

TEST_CASE("benchmark determinism, failures and latency") {
  const auto spec = small_spec();
  auto corpus = make_synthetic_corpus(spec);
  JudgedQuery missing;
  missing.query_id = "not-there";
  missing.relevant = rel("x");
  corpus.judgments.push_back(missing);
  const auto store = build_store(store_config(32), corpus.records, spec.base_time);
  BenchmarkParams params;
  params.search = SearchParams{20, 8, 0};
  const auto a = run_benchmark(*store, corpus.judgments, params);
  const auto b = run_benchmark(*store, corpus.judgments, params);
  CHECK(a.metrics.failed == 1);
  CHECK(a.metrics.evaluated == 10);
  CHECK(a.metrics.per_query.back().error.has_value());
  CHECK(a.metrics.map10 == b.metrics.map10);
  CHECK(a.metrics.mean_r_precision == b.metrics.mean_r_precision);
  CHECK(a.latency.query_count == 10);  // failed queries carry no latency
  CHECK(a.latency.min_ms <= a.latency.mean_ms);
  CHECK(a.latency.mean_ms <= a.latency.max_ms);
  CHECK(a.latency.total_hours * 3.6e6 >= a.latency.max_ms);

  LatencySummary s;
  s.count = 4;
  s.total_ms = 3.6e6;
  CHECK(LatencyReport::from(s).total_hours == doctest::Approx(1.0));
}

TEST_CASE("exhaustive search recovers every cluster") {
  SyntheticSpec spec;
  spec.clusters = 100;
  spec.cluster_size = 20;
  spec.dim = 64;
  spec.noise = 0.5;
  const auto corpus = make_synthetic_corpus(spec);
  const auto store = build_store(store_config(64), corpus.records, spec.base_time);
  BenchmarkParams params;
  params.search = SearchParams{1000, 8, 0};
  const auto result = run_benchmark(*store, corpus.judgments, params);
  CHECK(result.metrics.evaluated == 100);
  CHECK(result.metrics.recall_1000 == 1.0);
  CHECK(result.metrics.map10 > 0.5);
}

TEST_CASE("csv writers") {
  MetricsReport m;
  m.map1 = 0.5;
  m.map5 = 0.25;
  m.map10 = 0.125;
  m.mean_r_precision = 1.0 / 3.0;
  m.recall_1000 = 1.0;
  std::ostringstream q;
  write_quality_csv(q, {{"B=256", m}});
  CHECK(q.str() ==
        "Embedding Type,MAP@1,MAP@5,MAP@10,Mean R-Precision,Approx. Recall\n"
        "B=256,0.5000,0.2500,0.1250,0.3333,1.0000\n");
  std::ostringstream l;
  write_latency_csv(l, {{"B=512", LatencyReport{}}});
  CHECK(l.str().rfind("Embedding Type,min time (ms),max time (ms),mean time (ms),total time (hrs)\n", 0) == 0);
  std::ostringstream f;
  write_filter_csv(f, {{1000, 1.5, 2.0}});
  CHECK(f.str() == "index_size,with_filter_ms,without_filter_ms\n1000,1.5000,2.0000\n");
}

TEST_CASE("bench spec parsing and run") {
  BenchSpec spec = nlohmann::json::parse(R"({"corpus":{"clusters":5,"cluster_size":4,"dim":16,"noise":0.2},
                                             "code_bits":[128,64],"subcode_count":4,"k":10})")
                       .get<BenchSpec>();
  CHECK(spec.corpus.clusters == 5);
  CHECK(spec.code_bits == std::vector<std::size_t>{128, 64});
  const auto report = run_bench(spec);
  REQUIRE(report.quality.size() == 2);
  CHECK(report.quality[0].first == "B=128");
  CHECK(report.quality[1].first == "B=64");
  CHECK(report.quality[0].second.evaluated == 5);
  spec.k = 0;
  CHECK(code_of([&] { run_bench(spec); }) == ErrorCode::kInvalidConfig);
}
