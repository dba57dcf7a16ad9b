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

#include "lookalike/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "lookalike/error.hpp"
#include "lookalike/random.hpp"
#include "lookalike/vector_file.hpp"

namespace lookalike {

namespace {

void require_relevant(const RelevantSet& relevant) {
  if (relevant.empty()) throw Error(ErrorCode::kInvalidJudgment, "relevant set is empty");
}

std::size_t hits_in_prefix(const std::vector<std::string>& ranked, const RelevantSet& relevant,
                           std::size_t n) {
  const std::size_t end = std::min(n, ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < end; ++i) hits += relevant.count(ranked[i]);
  return hits;
}

}  // namespace

double r_precision(const std::vector<std::string>& ranked, const RelevantSet& relevant) {
  require_relevant(relevant);
  const std::size_t r = relevant.size();
  return static_cast<double>(hits_in_prefix(ranked, relevant, r)) / static_cast<double>(r);
}

double average_precision_at_k(const std::vector<std::string>& ranked, const RelevantSet& relevant,
                              std::size_t k) {
  require_relevant(relevant);
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "K must be at least 1");
  const std::size_t end = std::min(k, ranked.size());
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < end; ++i) {
    if (relevant.count(ranked[i]) == 0) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(std::min(relevant.size(), k));
}

double recall_at(const std::vector<std::string>& ranked, const RelevantSet& relevant, std::size_t cutoff) {
  require_relevant(relevant);
  if (cutoff == 0) throw Error(ErrorCode::kInvalidArgument, "cutoff must be at least 1");
  return static_cast<double>(hits_in_prefix(ranked, relevant, cutoff)) /
         static_cast<double>(relevant.size());
}

std::vector<JudgedQuery> read_judgments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open judgments file " + path.string());
  std::vector<JudgedQuery> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      JudgedQuery q;
      q.query_id = j.at("query_id").get<std::string>();
      for (const auto& id : j.at("relevant_ids")) q.relevant.insert(id.get<std::string>());
      if (j.contains("embedding")) q.embedding = EmbeddingVector(j.at("embedding").get<std::vector<float>>());
      q.relevant.erase(q.query_id);
      require_relevant(q.relevant);
      out.push_back(std::move(q));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidJudgment,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_judgments(const std::filesystem::path& path, const std::vector<JudgedQuery>& judged) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& q : judged) {
    std::vector<std::string> ids(q.relevant.begin(), q.relevant.end());
    std::sort(ids.begin(), ids.end());
    nlohmann::json j{{"query_id", q.query_id}, {"relevant_ids", ids}};
    out << j.dump() << '\n';
  }
}

LatencyReport LatencyReport::from(const LatencySummary& s) {
  LatencyReport r;
  r.query_count = s.count;
  r.min_ms = s.min_ms;
  r.max_ms = s.max_ms;
  r.mean_ms = s.mean_ms;
  r.total_hours = s.total_ms / 3'600'000.0;
  return r;
}

BenchmarkResult run_benchmark(const RollingStore& store, const std::vector<JudgedQuery>& judged,
                              const BenchmarkParams& params) {
  std::vector<Query> queries;
  queries.reserve(judged.size());
  for (const auto& j : judged) {
    if (j.embedding) {
      queries.push_back(Query::by_embedding(*j.embedding, params.search));
    } else {
      SearchParams sp = params.search;
      sp.k += 1;  // room for the query item itself
      queries.push_back(Query::by_item(j.query_id, sp));
    }
  }
  const BatchResult batch = batch_query(store, queries);

  BenchmarkResult result;
  MetricsReport& m = result.metrics;
  for (std::size_t i = 0; i < judged.size(); ++i) {
    const auto& j = judged[i];
    const auto& outcome = batch.outcomes[i];
    QueryMetrics qm;
    qm.query_id = j.query_id;
    if (!outcome.ok() || j.relevant.empty()) {
      qm.error = outcome.ok() ? "empty relevant set" : outcome.error_message;
      ++m.failed;
      m.per_query.push_back(std::move(qm));
      continue;
    }
    std::vector<std::string> ranked;
    ranked.reserve(outcome.page->hits.size());
    for (const auto& h : outcome.page->hits) {
      if (!j.embedding && h.hit.id == j.query_id) continue;
      ranked.push_back(h.hit.id);
    }
    if (ranked.size() > params.search.k) ranked.resize(params.search.k);
    qm.ap1 = average_precision_at_k(ranked, j.relevant, 1);
    qm.ap5 = average_precision_at_k(ranked, j.relevant, 5);
    qm.ap10 = average_precision_at_k(ranked, j.relevant, 10);
    qm.r_precision = r_precision(ranked, j.relevant);
    qm.recall = recall_at(ranked, j.relevant, params.recall_cutoff);
    m.map1 += qm.ap1;
    m.map5 += qm.ap5;
    m.map10 += qm.ap10;
    m.mean_r_precision += qm.r_precision;
    m.recall_1000 += qm.recall;
    ++m.evaluated;
    m.per_query.push_back(std::move(qm));
  }
  if (m.evaluated > 0) {
    const double n = static_cast<double>(m.evaluated);
    m.map1 /= n;
    m.map5 /= n;
    m.map10 /= n;
    m.mean_r_precision /= n;
    m.recall_1000 /= n;
  }
  result.latency = LatencyReport::from(batch.latency);
  return result;
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidConfig, "synthetic spec: " + what); };
  if (total_items() == 0) fail("no items requested");
  if (dim == 0) fail("dim must be positive");
  if (!std::isfinite(noise) || noise < 0.0) fail("noise must be finite and non-negative");
  if (!std::isfinite(variant_noise) || variant_noise < 0.0) fail("variant_noise must be finite and non-negative");
  if (clusters > 0 && cluster_size < queries_per_cluster + 1)
    fail("cluster_size must exceed queries_per_cluster");
  if (variant_groups > 0 && group_size < 2) fail("group_size must be at least 2");
  if (variant_groups > 0 && categories == 0) fail("categories must be positive");
  if (!(paraphrase_rate >= 0.0 && paraphrase_rate <= 1.0)) fail("paraphrase_rate must lie in [0, 1]");
  if (!(filter_fraction >= 0.0 && filter_fraction <= 1.0)) fail("filter_fraction must lie in [0, 1]");
  if (filter_fraction > 0.0) {
    try {
      if (normalize_term(filter_term) != filter_term) fail("filter_term must be a single lowercase token");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidConfig) throw;
      fail("filter_term is empty");
    }
  }
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  auto opt = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  opt("clusters", s.clusters);
  opt("cluster_size", s.cluster_size);
  opt("dim", s.dim);
  opt("noise", s.noise);
  opt("queries_per_cluster", s.queries_per_cluster);
  opt("variant_groups", s.variant_groups);
  opt("group_size", s.group_size);
  opt("paraphrase_rate", s.paraphrase_rate);
  opt("variant_noise", s.variant_noise);
  opt("categories", s.categories);
  opt("filter_term", s.filter_term);
  opt("filter_fraction", s.filter_fraction);
  opt("seed", s.seed);
  opt("spread_days", s.spread_days);
  if (j.contains("base_time")) s.base_time = parse_timestamp(j.at("base_time").get<std::string>());
}

namespace {

constexpr const char* kGeneric[] = {"new",    "sale",  "premium", "classic", "home",   "deluxe", "value",
                                    "pack",   "style", "quality", "best",    "modern", "basic",  "set",
                                    "series", "pro",   "plus",    "daily",   "select", "original"};
constexpr const char* kColors[] = {"black", "white", "red", "blue", "green", "gray", "pink", "navy"};
constexpr const char* kSizes[] = {"small", "medium", "large", "xl", "xxl", "mini"};

std::string id_of(char prefix, std::size_t group, std::size_t member) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%04zu-%02zu", prefix, group, member);
  return buf;
}

std::vector<float> noisy(const std::vector<double>& center, double noise, NormalSampler& normal) {
  std::vector<float> v(center.size());
  for (std::size_t i = 0; i < center.size(); ++i) v[i] = static_cast<float>(center[i] + noise * normal.next());
  return v;
}

std::vector<double> gaussian(std::size_t dim, NormalSampler& normal) {
  std::vector<double> c(dim);
  for (auto& x : c) x = normal.next();
  return c;
}

std::string generic_words(Xoshiro256StarStar& rng, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    out += ' ';
    out += kGeneric[rng.below(std::size(kGeneric))];
  }
  return out;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec) {
  spec.validate();
  Xoshiro256StarStar rng(spec.seed);
  NormalSampler normal(spec.seed ^ 0x5851F42D4C957F2DULL);
  const std::int64_t spread = static_cast<std::int64_t>(spec.spread_days) * 86400;
  auto stamp = [&] {
    const std::int64_t back = spread > 0 ? static_cast<std::int64_t>(rng.below(spread)) : 0;
    return spec.base_time - std::chrono::seconds{back};
  };

  SyntheticCorpus corpus;
  corpus.records.reserve(spec.total_items());

  for (std::size_t c = 0; c < spec.clusters; ++c) {
    const auto center = gaussian(spec.dim, normal);
    const std::string token = "cluster" + std::to_string(c);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < spec.cluster_size; ++i) {
      IngestRecord r;
      r.id = id_of('c', c, i);
      r.product_id = "p-" + r.id;
      r.title = token + generic_words(rng, 3);
      r.embedding = EmbeddingVector(noisy(center, spec.noise, normal));
      r.timestamp = stamp();
      ids.push_back(r.id);
      corpus.records.push_back(std::move(r));
    }
    for (std::size_t q = 0; q < spec.queries_per_cluster; ++q) {
      JudgedQuery jq;
      jq.query_id = ids[q];
      for (const auto& id : ids)
        if (id != ids[q]) jq.relevant.insert(id);
      corpus.judgments.push_back(std::move(jq));
    }
  }

  const auto paraphrased =
      static_cast<std::size_t>(std::llround(spec.paraphrase_rate * static_cast<double>(spec.group_size)));
  for (std::size_t g = 0; g < spec.variant_groups; ++g) {
    const auto center = gaussian(spec.dim, normal);
    const std::string brand = "brand" + std::to_string(g);
    const std::string category = "category" + std::to_string(rng.below(spec.categories));
    VariantGroup group;
    group.group_id = "group" + std::to_string(g);
    for (std::size_t i = 0; i < spec.group_size; ++i) {
      IngestRecord r;
      r.id = id_of('v', g, i);
      r.product_id = "p-" + r.id;
      // The last `paraphrased` members share no distinctive word with the rest.
      if (i + paraphrased < spec.group_size) {
        r.title = brand + ' ' + category + ' ' + kColors[rng.below(std::size(kColors))] + ' ' +
                  kSizes[rng.below(std::size(kSizes))] + generic_words(rng, 2);
      } else {
        r.title = "item" + std::to_string(g) + "x" + std::to_string(i) + generic_words(rng, 3);
      }
      r.embedding = EmbeddingVector(noisy(center, spec.variant_noise, normal));
      r.timestamp = stamp();
      group.member_ids.push_back(r.id);
      corpus.records.push_back(std::move(r));
    }
    corpus.groups.push_back(std::move(group));
  }

  if (spec.filter_fraction > 0.0) {
    const std::size_t n = corpus.records.size();
    const auto want = static_cast<std::size_t>(std::llround(spec.filter_fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < want; ++i) std::swap(order[i], order[i + rng.below(n - i)]);
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(want));
    for (std::size_t i = 0; i < want; ++i) {
      auto& r = corpus.records[order[i]];
      r.title += ' ' + spec.filter_term;
      corpus.filter_matches.push_back(r.id);
    }
  }
  return corpus;
}

void write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus, std::size_t dim) {
  std::filesystem::create_directories(dir);
  {
    SirvWriter vectors(dir / "vectors.sirv", static_cast<std::uint32_t>(dim));
    std::ofstream meta(dir / "meta.jsonl");
    if (!meta) throw Error(ErrorCode::kIo, "cannot write " + (dir / "meta.jsonl").string());
    for (const auto& r : corpus.records) {
      vectors.write(r.id, std::vector<float>(r.embedding.values().begin(), r.embedding.values().end()));
      nlohmann::json j = r.metadata();
      meta << j.dump() << '\n';
    }
    vectors.close();
  }
  write_judgments(dir / "judgments.jsonl", corpus.judgments);
  write_groups(dir / "groups.jsonl", corpus.groups);
}

std::unique_ptr<RollingStore> build_store(const StoreConfig& config, const std::vector<IngestRecord>& records,
                                          Timestamp now) {
  auto store = std::make_unique<RollingStore>(config);
  for (const auto& r : records) store->ingest(r, now);
  return store;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void write_quality_csv(std::ostream& out, const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  out << "Embedding Type,MAP@1,MAP@5,MAP@10,Mean R-Precision,Approx. Recall\n";
  for (const auto& [name, m] : rows) {
    out << name << ',' << fixed(m.map1, 4) << ',' << fixed(m.map5, 4) << ',' << fixed(m.map10, 4) << ','
        << fixed(m.mean_r_precision, 4) << ',' << fixed(m.recall_1000, 4) << '\n';
  }
}

void write_latency_csv(std::ostream& out, const std::vector<std::pair<std::string, LatencyReport>>& rows) {
  out << "Embedding Type,min time (ms),max time (ms),mean time (ms),total time (hrs)\n";
  for (const auto& [name, l] : rows) {
    out << name << ',' << fixed(l.min_ms, 3) << ',' << fixed(l.max_ms, 3) << ',' << fixed(l.mean_ms, 3) << ','
        << fixed(l.total_hours, 9) << '\n';
  }
}

void write_filter_csv(std::ostream& out, const std::vector<FilterLatencyRow>& rows) {
  out << "index_size,with_filter_ms,without_filter_ms\n";
  for (const auto& r : rows)
    out << r.index_size << ',' << fixed(r.with_filter_ms, 4) << ',' << fixed(r.without_filter_ms, 4) << '\n';
}

void from_json(const nlohmann::json& j, BenchSpec& s) {
  if (j.contains("corpus")) j.at("corpus").get_to(s.corpus);
  if (j.contains("code_bits")) j.at("code_bits").get_to(s.code_bits);
  if (j.contains("subcode_count")) j.at("subcode_count").get_to(s.subcode_count);
  if (j.contains("projection_seed")) j.at("projection_seed").get_to(s.projection_seed);
  if (j.contains("k")) j.at("k").get_to(s.k);
  if (j.contains("radius")) s.radius = j.at("radius").get<std::size_t>();
  if (j.contains("rerank_depth")) j.at("rerank_depth").get_to(s.rerank_depth);
}

BenchReport run_bench(const BenchSpec& spec) {
  if (spec.code_bits.empty()) throw Error(ErrorCode::kInvalidConfig, "bench spec lists no code lengths");
  if (spec.k == 0) throw Error(ErrorCode::kInvalidConfig, "bench k must be positive");
  const SyntheticCorpus corpus = make_synthetic_corpus(spec.corpus);
  BenchReport report;
  for (const std::size_t bits : spec.code_bits) {
    StoreConfig config;
    config.codec = CodecConfig{spec.corpus.dim, bits, spec.subcode_count, spec.projection_seed};
    config.window = std::max(Days{90}, Days{static_cast<int>(spec.corpus.spread_days)} + config.granularity);
    config.validate();
    const auto store = build_store(config, corpus.records, spec.corpus.base_time);
    BenchmarkParams params;
    params.search = SearchParams{spec.k, spec.radius.value_or(spec.subcode_count), spec.rerank_depth};
    const BenchmarkResult r = run_benchmark(*store, corpus.judgments, params);
    const std::string name = "B=" + std::to_string(bits);
    report.quality.emplace_back(name, r.metrics);
    report.latency.emplace_back(name, r.latency);
  }
  return report;
}

}  // namespace lookalike
