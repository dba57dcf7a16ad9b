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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "json.hpp"
#include "lookalike/error.hpp"
#include "lookalike/query_engine.hpp"
#include "lookalike/rolling_store.hpp"
#include "lookalike/rule_engine.hpp"

namespace lookalike {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Empty: in-memory store, nothing persisted.
  std::filesystem::path store_dir;
  StoreConfig store;
  /// Store used by rule simulation; the live store when absent.
  std::optional<std::filesystem::path> sample_store;
  std::optional<std::filesystem::path> static_dir;
  std::size_t sweep_threads = 1;
};

/// {"listen": "host:port", "store_dir", "codec": {D, B, m, seed},
///  "window_days", "granularity_days", "store_embeddings", "sample_store",
///  "static_dir", "sweep_threads"}
void from_json(const nlohmann::json& j, ServiceConfig& c);
ServiceConfig load_service_config(const std::filesystem::path& path);

/// HTTP status for an error code.
int http_status(ErrorCode code);
nlohmann::json error_json(ErrorCode code, const std::string& message);

/// Request body of POST /search:
/// {item_id | embedding, k, radius, threshold?, similarity?, rerank_depth?, filter?}
Query query_from_json(const nlohmann::json& j, const StoreConfig& config);

/// Replaces {"item_id": X} seeds by the stored code (and embedding) of X and
/// maps {"similarity": s} thresholds to Hamming thresholds. `filter` is
/// accepted as an alias of `predicate`.
nlohmann::json resolve_rule_request(nlohmann::json j, const RollingStore& store);

struct ApiRequest {
  std::string method;
  std::string path;
  std::string body;
  std::string idempotency_key;
  /// Multipart parts by field name.
  std::map<std::string, std::string> parts;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Transport-independent request handling. Thread-safe.
class Service {
 public:
  explicit Service(ServiceConfig config, std::function<Timestamp()> clock = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ApiResponse handle(const ApiRequest& request);

  /// Waits for running sweeps, then persists the store and the rules.
  void shutdown();

  RollingStore& store() noexcept { return *store_; }
  RuleBook& rules() noexcept { return rules_; }
  const ServiceConfig& config() const noexcept { return config_; }

  /// Blocks until the sweep job finishes (testing and CLI use).
  void wait_for_sweep(const std::string& job_id);

 private:
  struct SweepJob {
    std::string id;
    SweepProgress progress;
    std::thread worker;
    std::mutex mutex;
    std::optional<SweepReport> report;
    std::optional<nlohmann::json> error;
  };

  ApiResponse route(const ApiRequest& request);
  nlohmann::json status() const;
  nlohmann::json ingest_jsonl(const std::string& body);
  nlohmann::json ingest_paired(const std::string& vectors, const std::string& meta);
  nlohmann::json search(const nlohmann::json& body) const;
  nlohmann::json create_rule(const nlohmann::json& body);
  nlohmann::json update_rule(const std::string& id, const nlohmann::json& body);
  nlohmann::json simulate_rule(const std::string& id, const nlohmann::json& body) const;
  nlohmann::json finalize_rule(const std::string& id);
  nlohmann::json start_sweep(const nlohmann::json& body);
  nlohmann::json sweep_status(const std::string& id);
  nlohmann::json generate_variants(const nlohmann::json& body) const;
  void save_rules();

  ServiceConfig config_;
  std::function<Timestamp()> clock_;
  std::unique_ptr<RollingStore> store_;
  std::unique_ptr<RollingStore> sample_;
  RuleBook rules_;
  std::mutex rules_write_;

  std::mutex jobs_mutex_;
  std::map<std::string, std::unique_ptr<SweepJob>> jobs_;
  std::uint64_t next_job_ = 1;

  std::mutex idempotency_mutex_;
  std::map<std::string, std::pair<std::string, ApiResponse>> idempotent_;
  std::atomic<bool> shut_down_{false};
};

/// Binds a Service to an HTTP listener.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  /// Port 0 picks a free port. Throws kIo when binding fails.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lookalike
