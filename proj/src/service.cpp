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

#include "lookalike/service.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "httplib.h"
#include "lookalike/eval.hpp"
#include "lookalike/variant_candidates.hpp"

namespace lookalike {

using nlohmann::json;

namespace {

Timestamp system_now() { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); }

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : path) {
    if (c == '?') break;
    if (c == '/') {
      if (!current.empty()) parts.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) parts.push_back(std::move(current));
  return parts;
}

json parse_body(const std::string& body) {
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  json j = json::parse(body);
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "request body must be a JSON object");
  return j;
}

ApiResponse json_response(int status, const json& j) { return ApiResponse{status, j.dump(), "application/json"}; }

json consume_into(RollingStore& store, RecordSource& source, const std::function<Timestamp()>& clock) {
  json errors = json::array();
  ConsumeOptions options;
  options.clock = clock;
  options.on_warning = [&errors](const std::string& message) {
    if (errors.size() < 100) errors.push_back(message);
  };
  const ConsumeStats stats = consume_stream(store, source, options);
  return json{{"ingested", stats.ingested},
              {"unchanged", stats.unchanged},
              {"rejected", stats.rejected},
              {"errors", std::move(errors)}};
}

}  // namespace

void from_json(const json& j, ServiceConfig& c) {
  if (j.contains("listen")) {
    const auto listen = j.at("listen").get<std::string>();
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kInvalidConfig, "listen must be host:port");
    c.host = listen.substr(0, colon);
    try {
      c.port = std::stoi(listen.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidConfig, "bad port in listen address " + listen);
    }
  }
  if (j.contains("store_dir")) c.store_dir = j.at("store_dir").get<std::string>();
  if (j.contains("codec")) j.at("codec").get_to(c.store.codec);
  if (j.contains("window_days")) c.store.window = Days{j.at("window_days").get<int>()};
  if (j.contains("granularity_days")) c.store.granularity = Days{j.at("granularity_days").get<int>()};
  if (j.contains("store_embeddings")) c.store.store_embeddings = j.at("store_embeddings").get<bool>();
  if (j.contains("sample_store") && !j.at("sample_store").is_null())
    c.sample_store = j.at("sample_store").get<std::string>();
  if (j.contains("static_dir") && !j.at("static_dir").is_null()) c.static_dir = j.at("static_dir").get<std::string>();
  if (j.contains("sweep_threads")) c.sweep_threads = j.at("sweep_threads").get<std::size_t>();
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  ServiceConfig config;
  try {
    from_json(json::parse(in), config);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
  config.store.validate();
  return config;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kConfigConflict:
      return 409;
    case ErrorCode::kOutOfWindow:
    case ErrorCode::kIntegrity:
    case ErrorCode::kUnsupportedVersion:
      return 422;
    case ErrorCode::kIo:
      return 500;
    default:
      return 400;
  }
}

json error_json(ErrorCode code, const std::string& message) {
  return json{{"code", error_code_name(code)}, {"message", message}};
}

Query query_from_json(const json& j, const StoreConfig& config) {
  SearchParams params;
  params.k = j.value("k", std::size_t{10});
  params.radius = j.value("radius", std::size_t{0});
  params.rerank_depth = j.value("rerank_depth", std::size_t{0});
  if (params.k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  Query q = [&] {
    if (j.contains("item_id") && j.contains("embedding"))
      throw Error(ErrorCode::kInvalidArgument, "give either item_id or embedding, not both");
    if (j.contains("item_id")) return Query::by_item(j.at("item_id").get<std::string>(), params);
    if (j.contains("embedding"))
      return Query::by_embedding(EmbeddingVector(j.at("embedding").get<std::vector<float>>()), params);
    throw Error(ErrorCode::kInvalidArgument, "search needs item_id or embedding");
  }();
  if (j.contains("threshold") && !j.at("threshold").is_null()) {
    q.threshold = j.at("threshold").get<std::size_t>();
  } else if (j.contains("similarity") && !j.at("similarity").is_null()) {
    q.threshold = similarity_to_threshold(j.at("similarity").get<double>(), config.codec.code_bits);
  }
  for (const char* key : {"filter", "predicate"}) {
    if (j.contains(key) && !j.at(key).is_null()) q.predicate = j.at(key).get<TextPredicate>();
  }
  return q;
}

json resolve_rule_request(json j, const RollingStore& store) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "rule must be a JSON object");
  if (j.contains("seeds") && j["seeds"].is_array()) {
    const auto view = store.read();
    for (auto& seed : j["seeds"]) {
      if (!seed.is_object() || !seed.contains("item_id")) continue;
      const auto id = seed["item_id"].get<std::string>();
      const auto loc = view.find(id);
      if (!loc) throw Error(ErrorCode::kNotFound, "seed item " + id + " is not in the store");
      const auto& index = loc->segment->index();
      json resolved{{"id", id}, {"code", index.code_at(loc->slot).to_bit_string()}};
      if (const auto* emb = index.embedding_at(loc->slot)) {
        resolved["embedding"] = std::vector<float>(emb->values().begin(), emb->values().end());
      }
      seed = std::move(resolved);
    }
  }
  if (j.contains("threshold") && j["threshold"].is_object() && j["threshold"].contains("similarity")) {
    const double s = j["threshold"]["similarity"].get<double>();
    j["threshold"] = json{{"hamming", similarity_to_threshold(s, store.config().codec.code_bits)}};
  }
  if (j.contains("filter")) {
    j["predicate"] = j["filter"];
    j.erase("filter");
  }
  return j;
}

Service::Service(ServiceConfig config, std::function<Timestamp()> clock)
    : config_(std::move(config)), clock_(clock ? std::move(clock) : std::function<Timestamp()>(system_now)) {
  config_.store.validate();
  if (config_.store_dir.empty()) {
    store_ = std::make_unique<RollingStore>(config_.store);
  } else {
    std::filesystem::create_directories(config_.store_dir);
    store_ = RollingStore::open(config_.store_dir, config_.store);
    rules_ = RuleBook::load(config_.store_dir / "rules.json", store_->codec());
  }
  if (config_.sample_store) sample_ = RollingStore::load(*config_.sample_store, config_.store);
}

Service::~Service() {
  try {
    shutdown();
  } catch (...) {
  }
}

void Service::shutdown() {
  if (shut_down_.exchange(true)) return;
  {
    std::lock_guard lock(jobs_mutex_);
    for (auto& [id, job] : jobs_)
      if (job->worker.joinable()) job->worker.join();
  }
  if (!config_.store_dir.empty()) {
    store_->checkpoint();
    save_rules();
  }
}

void Service::wait_for_sweep(const std::string& job_id) {
  SweepJob* job = nullptr;
  {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw Error(ErrorCode::kNotFound, "no sweep job " + job_id);
    job = it->second.get();
  }
  if (job->worker.joinable()) job->worker.join();
}

ApiResponse Service::handle(const ApiRequest& request) {
  const bool cacheable = request.method != "GET" && !request.idempotency_key.empty();
  const std::string cache_key = request.method + ' ' + request.path + ' ' + request.idempotency_key;
  if (cacheable) {
    std::lock_guard lock(idempotency_mutex_);
    const auto it = idempotent_.find(cache_key);
    if (it != idempotent_.end()) {
      if (it->second.first != request.body) {
        return json_response(
            422, error_json(ErrorCode::kInvalidArgument, "idempotency key reused with a different body"));
      }
      return it->second.second;
    }
  }
  ApiResponse response;
  try {
    response = route(request);
  } catch (const Error& e) {
    response = json_response(http_status(e.code()), error_json(e.code(), e.what()));
  } catch (const json::exception& e) {
    response = json_response(400, error_json(ErrorCode::kInvalidArgument, e.what()));
  } catch (const std::exception& e) {
    response = json_response(500, json{{"code", "internal"}, {"message", e.what()}});
  }
  if (cacheable && response.status < 500) {
    std::lock_guard lock(idempotency_mutex_);
    idempotent_.emplace(cache_key, std::make_pair(request.body, response));
  }
  return response;
}

ApiResponse Service::route(const ApiRequest& request) {
  const auto parts = split_path(request.path);
  const std::string& method = request.method;
  const auto not_found = [&] {
    return json_response(404, error_json(ErrorCode::kNotFound, "no route for " + method + " " + request.path));
  };
  if (parts.empty()) return not_found();
  const std::string& head = parts[0];

  if (head == "status" && parts.size() == 1 && method == "GET") return json_response(200, status());
  if (head == "items" && parts.size() == 1 && method == "POST") {
    if (request.parts.count("vectors") != 0 && request.parts.count("meta") != 0) {
      return json_response(200, ingest_paired(request.parts.at("vectors"), request.parts.at("meta")));
    }
    return json_response(200, ingest_jsonl(request.body));
  }
  if (head == "search" && parts.size() == 1 && method == "POST") {
    return json_response(200, search(parse_body(request.body)));
  }
  if (head == "rules") {
    if (parts.size() == 1 && method == "POST") return json_response(201, create_rule(parse_body(request.body)));
    if (parts.size() == 1 && method == "GET") {
      json list = json::array();
      for (const auto& r : rules_.list()) list.push_back(r);
      return json_response(200, json{{"rules", std::move(list)}});
    }
    if (parts.size() == 2 && method == "GET") {
      const auto rule = rules_.get(parts[1]);
      if (!rule) throw Error(ErrorCode::kNotFound, "no rule " + parts[1]);
      return json_response(200, json(*rule));
    }
    if (parts.size() == 2 && method == "PUT") {
      return json_response(200, update_rule(parts[1], parse_body(request.body)));
    }
    if (parts.size() == 3 && method == "POST" && parts[2] == "simulate") {
      return json_response(200, simulate_rule(parts[1], parse_body(request.body)));
    }
    if (parts.size() == 3 && method == "POST" && parts[2] == "finalize") {
      return json_response(200, finalize_rule(parts[1]));
    }
  }
  if (head == "sweeps") {
    if (parts.size() == 1 && method == "POST") return json_response(202, start_sweep(parse_body(request.body)));
    if (parts.size() == 2 && method == "GET") return json_response(200, sweep_status(parts[1]));
  }
  if (head == "variants" && parts.size() == 2 && parts[1] == "generate" && method == "POST") {
    return json_response(200, generate_variants(parse_body(request.body)));
  }
  if (head == "bench" && parts.size() == 1 && method == "POST") {
    const json body = parse_body(request.body);
    const BenchSpec spec = (body.contains("spec") ? body.at("spec") : body).get<BenchSpec>();
    const BenchReport report = run_bench(spec);
    std::ostringstream quality, latency;
    write_quality_csv(quality, report.quality);
    write_latency_csv(latency, report.latency);
    json rows = json::array();
    for (std::size_t i = 0; i < report.quality.size(); ++i) {
      const auto& [name, m] = report.quality[i];
      const auto& l = report.latency[i].second;
      rows.push_back({{"name", name},
                      {"map1", m.map1},
                      {"map5", m.map5},
                      {"map10", m.map10},
                      {"mean_r_precision", m.mean_r_precision},
                      {"recall_1000", m.recall_1000},
                      {"evaluated", m.evaluated},
                      {"failed", m.failed},
                      {"mean_ms", l.mean_ms}});
    }
    return json_response(200, json{{"rows", std::move(rows)},
                                   {"quality_csv", quality.str()},
                                   {"latency_csv", latency.str()}});
  }
  return not_found();
}

json Service::status() const {
  const auto& c = store_->config();
  return json{{"item_count", store_->item_count()},
              {"segment_count", store_->segment_count()},
              {"window_days", c.window.count()},
              {"granularity_days", c.granularity.count()},
              {"store_embeddings", c.store_embeddings},
              {"codec", c.codec}};
}

json Service::ingest_jsonl(const std::string& body) {
  JsonlRecordSource source = JsonlRecordSource::from_text(body);
  return consume_into(*store_, source, clock_);
}

json Service::ingest_paired(const std::string& vectors, const std::string& meta) {
  static std::atomic<std::uint64_t> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("lookalike-upload-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  struct Cleanup {
    std::filesystem::path dir;
    ~Cleanup() {
      std::error_code ec;
      std::filesystem::remove_all(dir, ec);
    }
  } cleanup{dir};
  std::ofstream(dir / "vectors.sirv", std::ios::binary) << vectors;
  std::ofstream(dir / "meta.jsonl", std::ios::binary) << meta;
  PairedFileSource source(dir / "vectors.sirv", dir / "meta.jsonl");
  return consume_into(*store_, source, clock_);
}

json Service::search(const json& body) const {
  const Query q = query_from_json(body, store_->config());
  return json(run_query(*store_, q));
}

json Service::create_rule(const json& body) {
  json j = resolve_rule_request(body, *store_);
  j.erase("status");
  std::lock_guard lock(rules_write_);
  const Rule rule = rules_.create(rule_from_json(j, store_->codec()), store_->config().codec, clock_());
  save_rules();
  return json(rule);
}

json Service::update_rule(const std::string& id, const json& body) {
  json j = resolve_rule_request(body, *store_);
  j["id"] = id;
  j.erase("status");
  std::lock_guard lock(rules_write_);
  const Rule rule = rules_.update(rule_from_json(j, store_->codec()), store_->config().codec, clock_());
  save_rules();
  return json(rule);
}

json Service::simulate_rule(const std::string& id, const json& body) const {
  const auto rule = rules_.get(id);
  if (!rule) throw Error(ErrorCode::kNotFound, "no rule " + id);
  const std::size_t limit = body.value("limit", std::size_t{20});
  json out = simulate(*rule, sample_ ? *sample_ : *store_, limit);
  out["rule_id"] = id;
  return out;
}

json Service::finalize_rule(const std::string& id) {
  std::lock_guard lock(rules_write_);
  const Rule rule = rules_.finalize(id, clock_());
  save_rules();
  return json(rule);
}

void Service::save_rules() {
  if (!config_.store_dir.empty()) rules_.save(config_.store_dir / "rules.json");
}

json Service::start_sweep(const json& body) {
  if (shut_down_) throw Error(ErrorCode::kInvalidArgument, "service is shutting down");
  const auto ids = body.at("rule_ids").get<std::vector<std::string>>();
  if (ids.empty()) throw Error(ErrorCode::kInvalidArgument, "rule_ids is empty");
  std::vector<Rule> rules = rules_.snapshot(ids);
  for (const auto& r : rules) {
    if (r.status != RuleStatus::kFinalized) throw Error(ErrorCode::kInvalidArgument, "rule " + r.id + " is not finalized");
  }
  const std::string corpus = body.value("corpus_ref", std::string("store"));
  std::optional<std::filesystem::path> corpus_dir;
  if (corpus != "store") {
    corpus_dir = corpus;
    for (const char* name : {"vectors.sirv", "meta.jsonl"}) {
      if (!std::filesystem::exists(*corpus_dir / name))
        throw Error(ErrorCode::kNotFound, "corpus " + corpus + " has no " + name);
    }
  }

  std::lock_guard lock(jobs_mutex_);
  auto job = std::make_unique<SweepJob>();
  job->id = "sweep-" + std::to_string(next_job_++);
  SweepJob* raw = job.get();
  const std::size_t threads = config_.sweep_threads;
  job->worker = std::thread([this, raw, rules = std::move(rules), corpus_dir, threads] {
    try {
      SweepReport report;
      if (corpus_dir) {
        PairedFileSource source(*corpus_dir / "vectors.sirv", *corpus_dir / "meta.jsonl");
        SweepOptions options;
        options.threads = threads;
        options.progress = &raw->progress;
        report = sweep(rules, store_->codec(), source, options);
      } else {
        report = sweep_store(rules, *store_);
        raw->progress.scanned = report.scanned;
        raw->progress.total = report.scanned;
        raw->progress.flagged = report.flagged.size();
        raw->progress.done = true;
      }
      std::lock_guard job_lock(raw->mutex);
      raw->report = std::move(report);
    } catch (const Error& e) {
      std::lock_guard job_lock(raw->mutex);
      raw->error = error_json(e.code(), e.what());
    } catch (const std::exception& e) {
      std::lock_guard job_lock(raw->mutex);
      raw->error = json{{"code", "internal"}, {"message", e.what()}};
    }
    raw->progress.done = true;
  });
  const std::string id = job->id;
  jobs_.emplace(id, std::move(job));
  return json{{"job_id", id}, {"state", "running"}};
}

json Service::sweep_status(const std::string& id) {
  SweepJob* job = nullptr;
  {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw Error(ErrorCode::kNotFound, "no sweep job " + id);
    job = it->second.get();
  }
  std::lock_guard job_lock(job->mutex);
  json out{{"job_id", id},
           {"scanned", job->progress.scanned.load()},
           {"flagged_count", job->progress.flagged.load()},
           {"progress", job->progress.fraction()}};
  if (job->error) {
    out["state"] = "failed";
    out["error"] = *job->error;
  } else if (job->report) {
    out["state"] = "done";
    out["progress"] = 1.0;
    out["report"] = *job->report;
  } else {
    out["state"] = "running";
  }
  return out;
}

json Service::generate_variants(const json& body) const {
  SoSParams p;
  p.text_candidates = body.value("n", std::size_t{100});
  p.image_neighbors = body.value("k", std::size_t{0});
  p.radius = body.value("radius", store_->config().codec.subcode_count);
  return json(generate_candidates(*store_, body.at("item_id").get<std::string>(), p));
}

struct HttpServer::Impl {
  explicit Impl(Service& s) : service(s) {}
  Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest request;
    request.method = req.method;
    request.path = req.path;
    request.body = req.body;
    request.idempotency_key = req.get_header_value("Idempotency-Key");
    for (const auto& [name, part] : req.files) request.parts[name] = part.content;
    const ApiResponse response = impl_->service.handle(request);
    res.status = response.status;
    res.set_content(response.body, response.content_type);
  };
  auto& server = impl_->server;
  if (const auto& dir = service.config().static_dir) server.set_mount_point("/ui", dir->string());
  server.Get("/status", forward);
  server.Get(R"(/(rules|sweeps)(/.*)?)", forward);
  server.Post(".*", forward);
  server.Put(".*", forward);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& server = impl_->server;
  if (port == 0) {
    const int bound = server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!server.bind_to_port(host, port)) {
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace lookalike
