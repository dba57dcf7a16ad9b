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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "lookalike/codec.hpp"
#include "lookalike/hamming_index.hpp"
#include "lookalike/records.hpp"
#include "lookalike/text_filter.hpp"
#include "lookalike/time.hpp"
#include "lookalike/vector_file.hpp"

namespace lookalike {

inline constexpr std::uint32_t kStoreFormatVersion = 1;

struct StoreConfig {
  CodecConfig codec;
  Days window{90};
  Days granularity{7};
  bool store_embeddings = true;

  /// Codec invariants plus window >= granularity > 0.
  void validate() const;
};

struct ItemInfo {
  std::string product_id;
  std::string title;
  TokenizedTitle tokens;
  Timestamp timestamp{};
};

/// Items whose timestamps fall in [bucket_start, bucket_start + granularity).
class Segment {
 public:
  Segment(Timestamp bucket_start, const CodecConfig& codec);

  Timestamp bucket_start() const noexcept { return bucket_start_; }
  const SubcodeIndex& index() const noexcept { return index_; }
  std::size_t size() const noexcept { return index_.size(); }

  void upsert(const ItemMetadata& meta, const BinaryCode& code,
              std::optional<EmbeddingVector> embedding);
  bool remove(const std::string& id);

  const ItemInfo& info(Slot s) const { return *info_[s]; }
  const ItemInfo* find_info(std::string_view id) const;
  ItemMetadata metadata_at(Slot s) const;

  /// Slots whose titles satisfy `p`.
  AllowList prefilter(const TextPredicate& p) const;
  std::vector<std::string> prefilter_ids(const TextPredicate& p) const;

 private:
  Timestamp bucket_start_;
  SubcodeIndex index_;
  std::vector<std::optional<ItemInfo>> info_;
  TermIndex terms_;
};

enum class IngestResult { kInserted, kUpdated, kUnchanged };

struct SegmentManifest {
  std::string path;  // relative to the store directory
  Timestamp bucket_start{};
  std::size_t count = 0;
};

struct StoreManifest {
  std::uint32_t version = kStoreFormatVersion;
  StoreConfig config;
  std::uint64_t generation = 0;
  std::vector<SegmentManifest> segments;
};

/// Time-bucketed segments with rolling expiry.
///
/// One writer at a time; readers take a ReadView, which holds a shared lock so
/// a query sees every segment in one consistent state. When opened on a
/// directory, each mutation is appended to a write-ahead log and flushed
/// before it returns, and open() replays that log on restart.
class RollingStore {
 public:
  explicit RollingStore(StoreConfig config);
  ~RollingStore();
  RollingStore(const RollingStore&) = delete;
  RollingStore& operator=(const RollingStore&) = delete;

  /// Reads persisted segments. An empty or missing directory yields an empty
  /// store. A persisted codec that differs from config.codec is a
  /// kConfigConflict.
  static std::unique_ptr<RollingStore> load(const std::filesystem::path& dir, const StoreConfig& config);
  /// load() followed by write-ahead-log replay; later mutations are logged.
  static std::unique_ptr<RollingStore> open(const std::filesystem::path& dir, const StoreConfig& config);
  /// The persisted configuration, if the directory holds a store.
  static std::optional<StoreConfig> read_config(const std::filesystem::path& dir);

  const StoreConfig& config() const noexcept { return config_; }
  const Codec& codec() const noexcept { return codec_; }

  /// Rejects records older than now - window (kOutOfWindow), newer than now
  /// (kInvalidArgument) or of the wrong dimension (kShape).
  IngestResult ingest(const IngestRecord& record, Timestamp now);
  /// Drops segments with bucket_start + granularity <= now - window.
  std::size_t expire(Timestamp now);

  /// Writes a new generation under `dir` and switches store.json to it.
  StoreManifest persist(const std::filesystem::path& dir) const;
  /// Persists to the bound directory and truncates the write-ahead log.
  void checkpoint();

  std::size_t item_count() const;
  std::size_t segment_count() const;

  struct Location {
    const Segment* segment = nullptr;
    Slot slot = 0;
  };

  class ReadView {
   public:
    const std::map<Timestamp, Segment>& segments() const noexcept { return store_->segments_; }
    std::optional<Location> find(std::string_view id) const;
    std::size_t item_count() const noexcept { return store_->locations_.size(); }
    const StoreConfig& config() const noexcept { return store_->config_; }
    const Codec& codec() const noexcept { return store_->codec_; }

   private:
    friend class RollingStore;
    explicit ReadView(const RollingStore& store) : store_(&store), lock_(store.mutex_) {}
    const RollingStore* store_;
    std::shared_lock<std::shared_mutex> lock_;
  };

  ReadView read() const { return ReadView(*this); }

 private:
  Timestamp bucket_of(Timestamp t) const;
  IngestResult ingest_locked(const IngestRecord& record, Timestamp now);
  std::size_t expire_locked(Timestamp now);
  StoreManifest persist_locked(const std::filesystem::path& dir) const;
  void append_log(const nlohmann::json& entry);
  void replay_log(const std::filesystem::path& log_path);

  StoreConfig config_;
  Codec codec_;
  std::map<Timestamp, Segment> segments_;
  std::unordered_map<std::string, Timestamp> locations_;
  mutable std::shared_mutex mutex_;
  mutable std::uint64_t generation_ = 0;
  std::optional<std::filesystem::path> bound_dir_;
  std::FILE* log_ = nullptr;
};

/// Pull-based record stream. Positions are opaque resume points.
struct StreamItem {
  std::optional<IngestRecord> record;
  std::string error;  // set when the element was malformed
  std::uint64_t position = 0;  // resume point after this element
};

class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual std::optional<StreamItem> next() = 0;
  /// Positions the stream so the next element is the one after `position`.
  virtual void seek(std::uint64_t position) = 0;
  /// Total elements when known up front.
  virtual std::optional<std::uint64_t> size_hint() const { return std::nullopt; }
};

/// A SIRV vector file joined record-by-record with its metadata JSONL
/// sidecar. Position = records consumed.
class PairedFileSource : public RecordSource {
 public:
  PairedFileSource(const std::filesystem::path& vectors, const std::filesystem::path& metadata);
  std::optional<StreamItem> next() override;
  void seek(std::uint64_t position) override;
  std::optional<std::uint64_t> size_hint() const override;

 private:
  std::filesystem::path vectors_path_;
  std::filesystem::path metadata_path_;
  std::unique_ptr<SirvReader> vectors_;
  std::ifstream metadata_;
  std::uint64_t position_ = 0;
};

/// JSONL lines each holding a full IngestRecord (metadata + "embedding").
/// Position = lines consumed.
class JsonlRecordSource : public RecordSource {
 public:
  explicit JsonlRecordSource(std::vector<std::string> lines);
  static JsonlRecordSource from_text(std::string_view text);
  std::optional<StreamItem> next() override;
  void seek(std::uint64_t position) override { position_ = position; }
  std::optional<std::uint64_t> size_hint() const override { return lines_.size(); }

 private:
  std::vector<std::string> lines_;
  std::uint64_t position_ = 0;
};

struct ConsumeOptions {
  std::size_t batch_size = 256;
  std::function<Timestamp()> clock;
  /// Durable resume point; read at start, rewritten after each batch.
  std::optional<std::filesystem::path> checkpoint;
  /// Stop after this many elements (used to emulate a consumer crash).
  std::optional<std::uint64_t> max_elements;
  std::function<void(const std::string&)> on_warning;
};

struct ConsumeStats {
  std::uint64_t ingested = 0;
  std::uint64_t unchanged = 0;
  std::uint64_t rejected = 0;
  std::uint64_t position = 0;
  std::uint64_t batches = 0;
};

/// Applies records until the source is exhausted. Malformed or rejected
/// elements are reported through on_warning and counted, never fatal.
/// expire(now) runs between batches.
ConsumeStats consume_stream(RollingStore& store, RecordSource& source, const ConsumeOptions& options);

}  // namespace lookalike
