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

// Command-line front end: ingestion, search, rules, sweeps, benchmarks,
// variant recall curves and the HTTP service.

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "lookalike/eval.hpp"
#include "lookalike/service.hpp"
#include "lookalike/variant_candidates.hpp"

namespace {

using namespace lookalike;
using nlohmann::json;

constexpr int kUsageError = 2;
constexpr int kFailure = 1;

struct StoreOptions {
  std::string dir = "store";
  std::optional<std::size_t> dim;
  std::optional<std::size_t> bits;
  std::optional<std::size_t> subcodes;
  std::optional<std::uint64_t> seed;
  std::optional<int> window_days;
  std::optional<int> granularity_days;
  bool no_embeddings = false;
};

/// Persisted configuration with any explicit flags applied on top; a flag
/// that disagrees with the persisted codec surfaces as a config conflict
/// when the store is opened.
StoreConfig resolve_config(const StoreOptions& o, std::optional<std::size_t> fallback_dim) {
  StoreConfig c;
  if (auto persisted = RollingStore::read_config(o.dir)) {
    c = *persisted;
  } else {
    c.codec.code_bits = 256;
    c.codec.subcode_count = 16;
    c.codec.projection_seed = 1;
    if (!o.dim && !fallback_dim) {
      throw Error(ErrorCode::kInvalidConfig, "no store at " + o.dir + "; pass --dim to create one");
    }
    c.codec.dim = o.dim.value_or(fallback_dim.value_or(0));
  }
  if (o.dim) c.codec.dim = *o.dim;
  if (o.bits) c.codec.code_bits = *o.bits;
  if (o.subcodes) c.codec.subcode_count = *o.subcodes;
  if (o.seed) c.codec.projection_seed = *o.seed;
  if (o.window_days) c.window = Days{*o.window_days};
  if (o.granularity_days) c.granularity = Days{*o.granularity_days};
  if (o.no_embeddings) c.store_embeddings = false;
  c.validate();
  return c;
}

std::unique_ptr<RollingStore> open_store(const StoreOptions& o, std::optional<std::size_t> fallback_dim = {}) {
  return RollingStore::open(o.dir, resolve_config(o, fallback_dim));
}

json read_json_arg(const std::string& text) {
  if (!text.empty() && text.front() != '{' && text.front() != '[' && std::filesystem::exists(text)) {
    std::ifstream in(text);
    return json::parse(in);
  }
  return json::parse(text);
}

Timestamp now_or(const std::string& iso) {
  if (!iso.empty()) return parse_timestamp(iso);
  return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

void print_page(const ResultPage& page) {
  std::cout << std::left << std::setw(5) << "rank" << std::setw(24) << "id" << std::setw(10) << "distance"
            << std::setw(10) << "cosine" << "title\n";
  std::size_t rank = 1;
  for (const auto& h : page.hits) {
    std::ostringstream cosine;
    if (h.hit.cosine_score) cosine << std::fixed << std::setprecision(4) << *h.hit.cosine_score;
    std::cout << std::setw(5) << rank++ << std::setw(24) << h.hit.id << std::setw(10) << h.hit.hamming_distance
              << std::setw(10) << cosine.str() << h.title << '\n';
  }
}

std::vector<std::size_t> parse_grid(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const auto v = std::stoull(item, &used);
    if (used != item.size()) throw Error(ErrorCode::kInvalidArgument, "bad grid value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, "empty grid");
  return out;
}

int serve(const ServiceConfig& config) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(config);
  HttpServer server(service);
  const int port = server.bind(config.host, config.port);
  std::cout << "listening on " << config.host << ':' << port << std::endl;
  std::thread waiter([&] {
    int received = 0;
    sigwait(&signals, &received);
    server.stop();
  });
  server.listen();
  service.shutdown();
  // listen() can also end without a signal; wake the waiter in that case.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  std::cout << "stopped; store persisted" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lookalike: similar-image retrieval over binarized embeddings"};
  app.require_subcommand(1);
  StoreOptions store_opts;
  bool as_json = false;
  app.add_option("--store", store_opts.dir, "Store directory")->capture_default_str();
  app.add_flag("--json", as_json, "Machine-readable output");
  app.add_option("--dim", store_opts.dim, "Embedding dimension D (new stores)");
  app.add_option("--bits", store_opts.bits, "Code length B");
  app.add_option("--subcodes", store_opts.subcodes, "Subcode count m");
  app.add_option("--seed", store_opts.seed, "Projection seed");
  app.add_option("--window-days", store_opts.window_days, "Rolling window W in days");
  app.add_option("--granularity-days", store_opts.granularity_days, "Segment granularity in days");
  app.add_flag("--no-embeddings", store_opts.no_embeddings, "Keep codes only");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Ingest a SIRV vector file and its metadata sidecar");
  std::string vectors_path, meta_path, ingest_now;
  ingest->add_option("vectors", vectors_path, "vectors.sirv")->required()->check(CLI::ExistingFile);
  ingest->add_option("meta", meta_path, "meta.jsonl")->required()->check(CLI::ExistingFile);
  ingest->add_option("--now", ingest_now, "Ingestion clock (ISO-8601), defaults to the current time");

  // status
  auto* status = app.add_subcommand("status", "Show store size and configuration");

  // search
  auto* search = app.add_subcommand("search", "Nearest-neighbor search");
  std::string search_item, search_vector_file, search_vector_id, search_filter;
  SearchParams search_params;
  std::optional<std::size_t> search_threshold;
  auto* item_opt = search->add_option("--item", search_item, "Query by indexed item id");
  auto* vec_opt = search->add_option("--vector-file", search_vector_file, "Query by a SIRV file record");
  item_opt->excludes(vec_opt);
  search->add_option("--vector-id", search_vector_id, "Record of --vector-file to use (default: first)");
  search->add_option("--k", search_params.k, "Results to return")->capture_default_str();
  search->add_option("--radius", search_params.radius, "Hamming search radius")->capture_default_str();
  search->add_option("--rerank-depth", search_params.rerank_depth, "Cosine re-rank depth")->capture_default_str();
  search->add_option("--threshold", search_threshold, "Maximum Hamming distance");
  search->add_option("--filter", search_filter, "Text predicate JSON (inline or file)");

  // rule
  auto* rule = app.add_subcommand("rule", "Manage rules stored in <store>/rules.json");
  rule->require_subcommand(1);
  auto* rule_create = rule->add_subcommand("create", "Create a draft rule");
  std::string rule_name, rule_filter, rule_combine = "and", rule_from;
  std::vector<std::string> rule_seed_items;
  std::optional<std::size_t> rule_hamming;
  std::optional<double> rule_cosine, rule_similarity;
  rule_create->add_option("--from-json", rule_from, "Full rule JSON (inline or file)");
  rule_create->add_option("--name", rule_name, "Rule name");
  rule_create->add_option("--seed-item", rule_seed_items, "Seed item id (repeatable)");
  auto* h_opt = rule_create->add_option("--hamming", rule_hamming, "Hamming threshold");
  auto* c_opt = rule_create->add_option("--cosine", rule_cosine, "Cosine floor");
  auto* s_opt = rule_create->add_option("--similarity", rule_similarity, "Similarity in [0,1]");
  h_opt->excludes(c_opt)->excludes(s_opt);
  c_opt->excludes(s_opt);
  rule_create->add_option("--filter", rule_filter, "Text predicate JSON");
  rule_create->add_option("--combine", rule_combine, "and | image_only | text_only")
      ->check(CLI::IsMember({"and", "image_only", "text_only"}));
  auto* rule_simulate = rule->add_subcommand("simulate", "Simulate a rule on the store or a sample store");
  std::string rule_id, rule_sample;
  std::size_t rule_limit = 20;
  rule_simulate->add_option("id", rule_id)->required();
  rule_simulate->add_option("--limit", rule_limit)->capture_default_str();
  rule_simulate->add_option("--sample", rule_sample, "Sample store directory");
  auto* rule_finalize = rule->add_subcommand("finalize", "Freeze a rule for sweeps");
  rule_finalize->add_option("id", rule_id)->required();
  auto* rule_show = rule->add_subcommand("show", "Print a rule");
  rule_show->add_option("id", rule_id)->required();
  auto* rule_list = rule->add_subcommand("list", "List rules");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate finalized rules over a corpus stream");
  std::string sweep_rules, sweep_corpus;
  std::vector<std::string> sweep_ids;
  std::size_t sweep_threads = 1;
  sweep_cmd->add_option("--rules", sweep_rules, "Rules file (rules.json layout)")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--corpus", sweep_corpus, "Directory with vectors.sirv and meta.jsonl")
      ->required()
      ->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--rule-id", sweep_ids, "Restrict to these rules (default: all finalized)");
  sweep_cmd->add_option("--threads", sweep_threads)->capture_default_str();

  // bench
  auto* bench = app.add_subcommand("bench", "Retrieval-quality benchmark on a synthetic catalog");
  std::string bench_spec, bench_latency;
  bench->add_option("--spec", bench_spec, "Benchmark spec JSON")->required()->check(CLI::ExistingFile);
  bench->add_option("--latency-csv", bench_latency, "Also write the latency table here");

  // generate
  auto* generate = app.add_subcommand("generate", "Write a synthetic catalog to a directory");
  std::string gen_spec, gen_out;
  generate->add_option("--spec", gen_spec, "Synthetic corpus spec JSON")->required()->check(CLI::ExistingFile);
  generate->add_option("--out", gen_out, "Output directory")->required();

  // variants
  auto* variants = app.add_subcommand("variants", "Variant-candidate recall over an (N, k) grid");
  std::string var_groups, var_n_grid = "50,100,200", var_k_grid = "0,1,2";
  std::optional<std::size_t> var_radius;
  variants->add_option("--groups", var_groups, "Variant groups JSONL")->required()->check(CLI::ExistingFile);
  variants->add_option("--n-grid", var_n_grid, "Comma-separated N values")->capture_default_str();
  variants->add_option("--k-grid", var_k_grid, "Comma-separated k values")->capture_default_str();
  variants->add_option("--radius", var_radius, "Image search radius (default: m, exhaustive)");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_config;
  serve_cmd->add_option("--config", serve_config, "Service config JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*ingest) {
      std::optional<std::size_t> file_dim;
      {
        SirvReader probe(vectors_path);
        file_dim = probe.dim();
      }
      auto store = open_store(store_opts, file_dim);
      PairedFileSource source(vectors_path, meta_path);
      ConsumeOptions options;
      const Timestamp now = now_or(ingest_now);
      options.clock = [now] { return now; };
      std::vector<std::string> warnings;
      options.on_warning = [&](const std::string& m) { warnings.push_back(m); };
      ConsumeStats stats;
      try {
        stats = consume_stream(*store, source, options);
      } catch (...) {
        store->checkpoint();
        throw;
      }
      store->checkpoint();
      if (as_json) {
        std::cout << json{{"ingested", stats.ingested},
                          {"unchanged", stats.unchanged},
                          {"rejected", stats.rejected},
                          {"errors", warnings},
                          {"item_count", store->item_count()}}
                         .dump()
                  << '\n';
      } else {
        for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
        std::cout << "ingested " << stats.ingested << ", unchanged " << stats.unchanged << ", rejected "
                  << stats.rejected << "; store holds " << store->item_count() << " items\n";
      }
      return 0;
    }

    if (*status) {
      auto store = open_store(store_opts);
      const auto& c = store->config();
      const json j{{"item_count", store->item_count()},
                   {"segment_count", store->segment_count()},
                   {"window_days", c.window.count()},
                   {"codec", c.codec}};
      std::cout << (as_json ? j.dump() : j.dump(2)) << '\n';
      return 0;
    }

    if (*search) {
      if (search_item.empty() && search_vector_file.empty()) {
        std::cerr << "search needs --item or --vector-file\n";
        return kUsageError;
      }
      auto store = open_store(store_opts);
      Query q = [&] {
        if (!search_item.empty()) return Query::by_item(search_item, search_params);
        SirvReader reader(search_vector_file);
        while (auto rec = reader.next()) {
          if (search_vector_id.empty() || rec->id == search_vector_id)
            return Query::by_embedding(EmbeddingVector(std::move(rec->values)), search_params);
        }
        throw Error(ErrorCode::kNotFound, "no matching record in " + search_vector_file);
      }();
      q.threshold = search_threshold;
      if (!search_filter.empty()) q.predicate = read_json_arg(search_filter).get<TextPredicate>();
      const ResultPage page = run_query(*store, q);
      if (as_json) {
        std::cout << json(page).dump() << '\n';
      } else {
        print_page(page);
      }
      return 0;
    }

    if (*rule) {
      auto store = open_store(store_opts);
      const auto rules_path = std::filesystem::path(store_opts.dir) / "rules.json";
      RuleBook book = RuleBook::load(rules_path, store->codec());
      const Timestamp now = now_or("");
      auto emit = [&](const json& j) { std::cout << (as_json ? j.dump() : j.dump(2)) << '\n'; };
      if (*rule_create) {
        json request;
        if (!rule_from.empty()) {
          request = read_json_arg(rule_from);
        } else {
          if (rule_seed_items.empty()) throw Error(ErrorCode::kInvalidArgument, "give --seed-item or --from-json");
          request["name"] = rule_name;
          request["seeds"] = json::array();
          for (const auto& id : rule_seed_items) request["seeds"].push_back({{"item_id", id}});
          if (rule_hamming) {
            request["threshold"] = {{"hamming", *rule_hamming}};
          } else if (rule_cosine) {
            request["threshold"] = {{"cosine", *rule_cosine}};
          } else if (rule_similarity) {
            request["threshold"] = {{"similarity", *rule_similarity}};
          } else {
            request["threshold"] = {{"hamming", 0}};
          }
          if (!rule_filter.empty()) request["predicate"] = read_json_arg(rule_filter);
          request["combine"] = rule_combine;
        }
        request = resolve_rule_request(std::move(request), *store);
        request.erase("status");
        const Rule created = book.create(rule_from_json(request, store->codec()), store->config().codec, now);
        book.save(rules_path);
        emit(json(created));
      } else if (*rule_simulate) {
        const auto r = book.get(rule_id);
        if (!r) throw Error(ErrorCode::kNotFound, "no rule " + rule_id);
        std::unique_ptr<RollingStore> sample;
        if (!rule_sample.empty()) sample = RollingStore::load(rule_sample, store->config());
        emit(json(simulate(*r, sample ? *sample : *store, rule_limit)));
      } else if (*rule_finalize) {
        const Rule r = book.finalize(rule_id, now);
        book.save(rules_path);
        emit(json(r));
      } else if (*rule_show) {
        const auto r = book.get(rule_id);
        if (!r) throw Error(ErrorCode::kNotFound, "no rule " + rule_id);
        emit(json(*r));
      } else if (*rule_list) {
        json list = json::array();
        for (const auto& r : book.list()) list.push_back(r);
        emit(list);
      }
      return 0;
    }

    if (*sweep_cmd) {
      const StoreConfig config = resolve_config(store_opts, std::nullopt);
      const Codec codec(config.codec);
      const RuleBook book = RuleBook::load(sweep_rules, codec);
      std::vector<Rule> rules;
      if (sweep_ids.empty()) {
        for (auto& r : book.list())
          if (r.status == RuleStatus::kFinalized) rules.push_back(std::move(r));
        if (rules.empty()) throw Error(ErrorCode::kInvalidArgument, sweep_rules + " holds no finalized rule");
      } else {
        rules = book.snapshot(sweep_ids);
      }
      const std::filesystem::path dir(sweep_corpus);
      PairedFileSource source(dir / "vectors.sirv", dir / "meta.jsonl");
      SweepOptions options;
      options.threads = sweep_threads;
      options.on_warning = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
      const SweepReport report = sweep(rules, codec, source, options);
      if (as_json) {
        std::cout << json(report).dump() << '\n';
      } else {
        std::cout << "scanned " << report.scanned << ", skipped " << report.skipped << ", flagged "
                  << report.flagged.size() << '\n';
        for (const auto& f : report.flagged)
          std::cout << f.item_id << '\t' << f.rule_id << '\t' << f.best_seed << '\t' << f.score << '\n';
      }
      return 0;
    }

    if (*bench) {
      const BenchSpec spec = read_json_arg(bench_spec).get<BenchSpec>();
      const BenchReport report = run_bench(spec);
      if (!bench_latency.empty()) {
        std::ofstream out(bench_latency);
        write_latency_csv(out, report.latency);
      }
      if (as_json) {
        json rows = json::array();
        for (const auto& [name, m] : report.quality) {
          rows.push_back({{"name", name},
                          {"map1", m.map1},
                          {"map5", m.map5},
                          {"map10", m.map10},
                          {"mean_r_precision", m.mean_r_precision},
                          {"recall_1000", m.recall_1000},
                          {"evaluated", m.evaluated},
                          {"failed", m.failed}});
        }
        std::cout << rows.dump() << '\n';
      } else {
        write_quality_csv(std::cout, report.quality);
      }
      return 0;
    }

    if (*generate) {
      const SyntheticSpec spec = read_json_arg(gen_spec).get<SyntheticSpec>();
      const SyntheticCorpus corpus = make_synthetic_corpus(spec);
      write_synthetic_corpus(gen_out, corpus, spec.dim);
      std::cout << "wrote " << corpus.records.size() << " records to " << gen_out << '\n';
      return 0;
    }

    if (*variants) {
      auto store = open_store(store_opts);
      const auto groups = read_groups(var_groups);
      const RecallCurve curve = recall_curve(*store, groups, parse_grid(var_n_grid), parse_grid(var_k_grid),
                                             var_radius.value_or(store->config().codec.subcode_count));
      if (as_json) {
        std::cout << json(curve).dump() << '\n';
      } else {
        write_recall_csv(std::cout, curve);
      }
      return 0;
    }

    if (*serve_cmd) return serve(load_service_config(serve_config));
  } catch (const Error& e) {
    std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << '\n';
    return kFailure;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: invalid_argument: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return 0;
}
