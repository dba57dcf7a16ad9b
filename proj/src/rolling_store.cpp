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

#include "lookalike/rolling_store.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <sstream>

#include "lookalike/error.hpp"

namespace lookalike {
namespace fs = std::filesystem;
namespace {

constexpr char kStoreFile[] = "store.json";
constexpr char kLogFile[] = "wal.jsonl";

class Fnv1a {
 public:
  void update(const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= static_cast<unsigned char>(data[i]);
      hash_ *= 0x100000001B3ULL;
    }
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xCBF29CE484222325ULL;
};

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t k = 0; k < sizeof(T); ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos, const std::string& where) {
  if (pos + sizeof(T) > in.size()) {
    throw Error(ErrorCode::kIntegrity, where + ": truncated at offset " + std::to_string(pos));
  }
  T v = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) {
    v |= static_cast<T>(static_cast<unsigned char>(in[pos + k])) << (8 * k);
  }
  pos += sizeof(T);
  return v;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIntegrity, "missing file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

nlohmann::json parse_json_file(const fs::path& path, const std::string& where) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIntegrity, where + ": malformed " + path.filename().string() + ": " + e.what());
  }
}

nlohmann::json config_to_json(const StoreConfig& c) {
  return {{"codec", c.codec},
          {"window_days", c.window.count()},
          {"granularity_days", c.granularity.count()},
          {"store_embeddings", c.store_embeddings}};
}

StoreConfig config_from_json(const nlohmann::json& j) {
  StoreConfig c;
  c.codec = j.at("codec").get<CodecConfig>();
  c.window = Days{j.at("window_days").get<long>()};
  c.granularity = Days{j.at("granularity_days").get<long>()};
  c.store_embeddings = j.at("store_embeddings").get<bool>();
  return c;
}

std::string segment_dir_name(Timestamp bucket_start) {
  return "seg-" + std::to_string(bucket_start.time_since_epoch().count());
}

// codes.bin: "SIRC" | u32 version | u32 code_bits | u64 count |
// count x (u16 id_len | id | ceil(B/8) code bytes) | u64 FNV-1a of the preceding bytes.
std::string encode_codes(const Segment& segment, const std::vector<Slot>& slots, std::size_t code_bits) {
  std::string out = "SIRC";
  put_le<std::uint32_t>(out, kStoreFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(code_bits));
  put_le<std::uint64_t>(out, slots.size());
  for (Slot s : slots) {
    const auto& id = segment.index().id_at(s);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out += id;
    const auto bytes = segment.index().code_at(s).to_bytes();
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }
  Fnv1a fnv;
  fnv.update(out.data(), out.size());
  put_le<std::uint64_t>(out, fnv.value());
  return out;
}

std::vector<std::pair<std::string, BinaryCode>> decode_codes(const std::string& in, std::size_t code_bits,
                                                             const std::string& where) {
  if (in.size() < 4 || std::memcmp(in.data(), "SIRC", 4) != 0) {
    throw Error(ErrorCode::kIntegrity, where + ": codes.bin has bad magic");
  }
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(in, pos, where);
  if (version != kStoreFormatVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, where + ": codes.bin version " + std::to_string(version));
  }
  const auto bits = get_le<std::uint32_t>(in, pos, where);
  if (bits != code_bits) throw Error(ErrorCode::kIntegrity, where + ": codes.bin code length mismatch");
  const auto count = get_le<std::uint64_t>(in, pos, where);
  const std::size_t code_bytes = (code_bits + 7) / 8;
  std::vector<std::pair<std::string, BinaryCode>> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto id_len = get_le<std::uint16_t>(in, pos, where);
    if (pos + id_len + code_bytes > in.size()) {
      throw Error(ErrorCode::kIntegrity, where + ": codes.bin truncated in record " + std::to_string(k));
    }
    std::string id = in.substr(pos, id_len);
    pos += id_len;
    const auto* p = reinterpret_cast<const std::uint8_t*>(in.data() + pos);
    out.emplace_back(std::move(id), BinaryCode::from_bytes({p, code_bytes}, code_bits));
    pos += code_bytes;
  }
  Fnv1a fnv;
  fnv.update(in.data(), pos);
  const auto checksum = get_le<std::uint64_t>(in, pos, where);
  if (checksum != fnv.value() || pos != in.size()) {
    throw Error(ErrorCode::kIntegrity, where + ": codes.bin checksum mismatch");
  }
  return out;
}

void fsync_file(std::FILE* f) {
  std::fflush(f);
  ::fsync(::fileno(f));
}

}  // namespace

void StoreConfig::validate() const {
  codec.validate();
  if (granularity.count() <= 0) throw Error(ErrorCode::kInvalidConfig, "bucket granularity must be positive");
  if (window < granularity) throw Error(ErrorCode::kInvalidConfig, "window must be at least one bucket");
}

Segment::Segment(Timestamp bucket_start, const CodecConfig& codec)
    : bucket_start_(bucket_start), index_(codec) {}

void Segment::upsert(const ItemMetadata& meta, const BinaryCode& code,
                     std::optional<EmbeddingVector> embedding) {
  if (const auto old = index_.find_slot(meta.id)) terms_.remove(*old, info_[*old]->tokens);
  const Slot slot = index_.insert(meta.id, code, std::move(embedding));
  if (info_.size() <= slot) info_.resize(slot + 1);
  info_[slot] = ItemInfo{meta.product_id, meta.title, tokenize(meta.title), meta.timestamp};
  terms_.add(slot, info_[slot]->tokens);
}

bool Segment::remove(const std::string& id) {
  const auto slot = index_.find_slot(id);
  if (!slot) return false;
  terms_.remove(*slot, info_[*slot]->tokens);
  info_[*slot].reset();
  index_.remove(id);
  return true;
}

const ItemInfo* Segment::find_info(std::string_view id) const {
  const auto slot = index_.find_slot(id);
  return slot ? &*info_[*slot] : nullptr;
}

ItemMetadata Segment::metadata_at(Slot s) const {
  const auto& info = *info_[s];
  return {index_.id_at(s), info.product_id, info.title, info.timestamp};
}

AllowList Segment::prefilter(const TextPredicate& p) const {
  return AllowList(index_.slot_capacity(), terms_.match(p, index_.live_slots()));
}

std::vector<std::string> Segment::prefilter_ids(const TextPredicate& p) const {
  std::vector<std::string> ids;
  for (Slot s : terms_.match(p, index_.live_slots())) ids.push_back(index_.id_at(s));
  std::sort(ids.begin(), ids.end());
  return ids;
}

RollingStore::RollingStore(StoreConfig config)
    : config_((config.validate(), config)), codec_(config_.codec) {}

RollingStore::~RollingStore() {
  if (log_ != nullptr) std::fclose(log_);
}

Timestamp RollingStore::bucket_of(Timestamp t) const {
  const auto width = std::chrono::duration_cast<std::chrono::seconds>(config_.granularity);
  const auto since = t.time_since_epoch();
  auto q = since.count() / width.count();
  if (since.count() % width.count() < 0) --q;
  return Timestamp{width * q};
}

std::optional<RollingStore::Location> RollingStore::ReadView::find(std::string_view id) const {
  const auto it = store_->locations_.find(std::string(id));
  if (it == store_->locations_.end()) return std::nullopt;
  const Segment& segment = store_->segments_.at(it->second);
  return Location{&segment, *segment.index().find_slot(id)};
}

IngestResult RollingStore::ingest(const IngestRecord& record, Timestamp now) {
  std::unique_lock lock(mutex_);
  const IngestResult result = ingest_locked(record, now);
  if (result != IngestResult::kUnchanged && log_ != nullptr) {
    append_log({{"op", "ingest"}, {"now", format_timestamp(now)}, {"record", record}});
  }
  return result;
}

IngestResult RollingStore::ingest_locked(const IngestRecord& record, Timestamp now) {
  if (record.id.empty()) throw Error(ErrorCode::kInvalidArgument, "record id must be non-empty");
  if (record.embedding.dim() != config_.codec.dim) {
    throw Error(ErrorCode::kShape, "record " + record.id + " has dim " +
                                       std::to_string(record.embedding.dim()) + ", store expects " +
                                       std::to_string(config_.codec.dim));
  }
  if (record.timestamp > now) {
    throw Error(ErrorCode::kInvalidArgument, "record " + record.id + " is timestamped in the future");
  }
  if (record.timestamp < now - config_.window) {
    throw Error(ErrorCode::kOutOfWindow, "record " + record.id + " at " +
                                             format_timestamp(record.timestamp) +
                                             " is older than the " +
                                             std::to_string(config_.window.count()) + "-day window");
  }

  const BinaryCode code = codec_.encode(record.embedding);
  const Timestamp bucket = bucket_of(record.timestamp);
  IngestResult result = IngestResult::kInserted;
  if (const auto it = locations_.find(record.id); it != locations_.end()) {
    Segment& previous = segments_.at(it->second);
    const Slot slot = *previous.index().find_slot(record.id);
    const ItemInfo& info = previous.info(slot);
    const auto* stored_embedding = previous.index().embedding_at(slot);
    const bool same_embedding =
        config_.store_embeddings ? (stored_embedding != nullptr && *stored_embedding == record.embedding) : true;
    if (it->second == bucket && previous.index().code_at(slot) == code &&
        info.product_id == record.product_id && info.title == record.title &&
        info.timestamp == record.timestamp && same_embedding) {
      return IngestResult::kUnchanged;
    }
    if (it->second != bucket) {
      previous.remove(record.id);
      if (previous.size() == 0) segments_.erase(it->second);
    }
    result = IngestResult::kUpdated;
  }

  auto seg = segments_.try_emplace(bucket, bucket, config_.codec).first;
  seg->second.upsert(record.metadata(), code,
                     config_.store_embeddings ? std::optional<EmbeddingVector>(record.embedding) : std::nullopt);
  locations_[record.id] = bucket;
  return result;
}

std::size_t RollingStore::expire(Timestamp now) {
  std::unique_lock lock(mutex_);
  const std::size_t dropped = expire_locked(now);
  if (dropped > 0 && log_ != nullptr) append_log({{"op", "expire"}, {"now", format_timestamp(now)}});
  return dropped;
}

std::size_t RollingStore::expire_locked(Timestamp now) {
  const Timestamp cutoff = now - config_.window;
  std::size_t dropped = 0;
  for (auto it = segments_.begin(); it != segments_.end();) {
    if (it->first + config_.granularity > cutoff) break;  // map is ordered by bucket_start
    for (Slot s : it->second.index().live_slots()) locations_.erase(it->second.index().id_at(s));
    it = segments_.erase(it);
    ++dropped;
  }
  return dropped;
}

std::size_t RollingStore::item_count() const {
  std::shared_lock lock(mutex_);
  return locations_.size();
}

std::size_t RollingStore::segment_count() const {
  std::shared_lock lock(mutex_);
  return segments_.size();
}

StoreManifest RollingStore::persist(const fs::path& dir) const {
  std::shared_lock lock(mutex_);
  return persist_locked(dir);
}

StoreManifest RollingStore::persist_locked(const fs::path& dir) const {
  fs::create_directories(dir);
  std::uint64_t generation = generation_ + 1;
  if (const auto existing = dir / kStoreFile; fs::exists(existing)) {
    const auto j = parse_json_file(existing, dir.string());
    generation = std::max(generation, j.value("generation", std::uint64_t{0}) + 1);
  }
  const std::string gen_name = "gen-" + std::to_string(generation);
  const fs::path gen_dir = dir / gen_name;
  fs::remove_all(gen_dir);
  fs::create_directories(gen_dir);

  StoreManifest manifest;
  manifest.config = config_;
  manifest.generation = generation;
  for (const auto& [bucket, segment] : segments_) {
    const std::string name = segment_dir_name(bucket);
    const fs::path seg_dir = gen_dir / name;
    fs::create_directories(seg_dir);

    std::vector<Slot> slots = segment.index().live_slots();
    std::sort(slots.begin(), slots.end(), [&](Slot a, Slot b) {
      return segment.index().id_at(a) < segment.index().id_at(b);
    });
    const bool has_embeddings = config_.store_embeddings;

    write_file(seg_dir / "codes.bin", encode_codes(segment, slots, config_.codec.code_bits));
    std::string meta;
    for (Slot s : slots) meta += nlohmann::json(segment.metadata_at(s)).dump() + "\n";
    write_file(seg_dir / "meta.jsonl", meta);
    if (has_embeddings) {
      SirvWriter writer(seg_dir / "embeds.sirv", static_cast<std::uint32_t>(config_.codec.dim));
      for (Slot s : slots) {
        const auto* e = segment.index().embedding_at(s);
        writer.write(segment.index().id_at(s), std::vector<float>(e->values().begin(), e->values().end()));
      }
      writer.close();
    }
    const nlohmann::json seg_manifest = {{"version", kStoreFormatVersion},
                                         {"codec", config_.codec},
                                         {"bucket_start", format_timestamp(bucket)},
                                         {"count", slots.size()},
                                         {"has_embeddings", has_embeddings}};
    write_file(seg_dir / "manifest.json", seg_manifest.dump(2) + "\n");
    manifest.segments.push_back({gen_name + "/" + name, bucket, slots.size()});
  }

  nlohmann::json store_json = config_to_json(config_);
  store_json["version"] = kStoreFormatVersion;
  store_json["generation"] = generation;
  auto segs = nlohmann::json::array();
  for (const auto& s : manifest.segments) {
    segs.push_back({{"path", s.path}, {"bucket_start", format_timestamp(s.bucket_start)}, {"count", s.count}});
  }
  store_json["segments"] = segs;
  const fs::path tmp = dir / "store.json.tmp";
  write_file(tmp, store_json.dump(2) + "\n");
  fs::rename(tmp, dir / kStoreFile);

  // Older generations are unreachable once store.json points at the new one.
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && name.starts_with("gen-") && name != gen_name) fs::remove_all(entry.path());
  }
  generation_ = generation;
  return manifest;
}

std::optional<StoreConfig> RollingStore::read_config(const fs::path& dir) {
  const fs::path path = dir / kStoreFile;
  if (!fs::exists(path)) return std::nullopt;
  const auto j = parse_json_file(path, dir.string());
  const auto version = j.value("version", 0u);
  if (version != kStoreFormatVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, dir.string() + ": store version " + std::to_string(version));
  }
  try {
    return config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIntegrity, dir.string() + ": malformed store.json: " + e.what());
  }
}

std::unique_ptr<RollingStore> RollingStore::load(const fs::path& dir, const StoreConfig& config) {
  auto store = std::make_unique<RollingStore>(config);
  const auto persisted = read_config(dir);
  if (!persisted) return store;
  if (!(persisted->codec == config.codec) || persisted->granularity != config.granularity) {
    throw Error(ErrorCode::kConfigConflict,
                dir.string() + ": persisted codec/granularity differ from the requested configuration");
  }

  const auto store_json = parse_json_file(dir / kStoreFile, dir.string());
  store->generation_ = store_json.value("generation", std::uint64_t{0});
  for (const auto& entry : store_json.at("segments")) {
    const std::string rel = entry.at("path").get<std::string>();
    const fs::path seg_dir = dir / rel;
    const std::string where = "segment " + rel;
    const auto manifest = parse_json_file(seg_dir / "manifest.json", where);
    const auto version = manifest.value("version", 0u);
    if (version != kStoreFormatVersion) {
      throw Error(ErrorCode::kUnsupportedVersion, where + ": version " + std::to_string(version));
    }
    if (!(manifest.at("codec").get<CodecConfig>() == config.codec)) {
      throw Error(ErrorCode::kConfigConflict, where + ": codec differs from store");
    }
    const Timestamp bucket = parse_timestamp(manifest.at("bucket_start").get<std::string>());
    const std::size_t count = manifest.at("count").get<std::size_t>();

    auto codes = decode_codes(read_file(seg_dir / "codes.bin"), config.codec.code_bits, where);
    std::unordered_map<std::string, ItemMetadata> meta;
    std::istringstream meta_lines(read_file(seg_dir / "meta.jsonl"));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(meta_lines, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        auto m = nlohmann::json::parse(line).get<ItemMetadata>();
        meta.emplace(m.id, std::move(m));
      } catch (const std::exception& e) {
        throw Error(ErrorCode::kIntegrity, where + ": meta.jsonl line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    std::unordered_map<std::string, EmbeddingVector> embeds;
    const bool has_embeddings = manifest.value("has_embeddings", false);
    if (has_embeddings) {
      try {
        for (auto& rec : read_vector_file(seg_dir / "embeds.sirv").records) {
          embeds.emplace(rec.id, EmbeddingVector(std::move(rec.values)));
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kUnsupportedVersion) throw;
        throw Error(ErrorCode::kIntegrity, where + ": " + e.what());
      }
    }
    if (codes.size() != count || meta.size() != count || (has_embeddings && embeds.size() != count)) {
      throw Error(ErrorCode::kIntegrity, where + ": file record counts disagree with manifest");
    }

    auto& segment = store->segments_.try_emplace(bucket, bucket, config.codec).first->second;
    for (auto& [id, code] : codes) {
      const auto m = meta.find(id);
      if (m == meta.end()) throw Error(ErrorCode::kIntegrity, where + ": no metadata for " + id);
      std::optional<EmbeddingVector> embedding;
      if (has_embeddings && config.store_embeddings) {
        const auto e = embeds.find(id);
        if (e == embeds.end()) throw Error(ErrorCode::kIntegrity, where + ": no embedding for " + id);
        embedding = std::move(e->second);
      }
      segment.upsert(m->second, code, std::move(embedding));
      store->locations_[id] = bucket;
    }
  }
  return store;
}

std::unique_ptr<RollingStore> RollingStore::open(const fs::path& dir, const StoreConfig& config) {
  fs::create_directories(dir);
  auto store = load(dir, config);
  const fs::path log_path = dir / kLogFile;
  if (fs::exists(log_path)) store->replay_log(log_path);
  store->bound_dir_ = dir;
  store->log_ = std::fopen(log_path.c_str(), "ab");
  if (store->log_ == nullptr) throw Error(ErrorCode::kIo, "cannot open " + log_path.string());
  return store;
}

void RollingStore::replay_log(const fs::path& log_path) {
  std::ifstream in(log_path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json entry;
    try {
      entry = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      break;  // torn final write: never acknowledged
    }
    const Timestamp now = parse_timestamp(entry.at("now").get<std::string>());
    const auto op = entry.at("op").get<std::string>();
    if (op == "ingest") {
      try {
        ingest_locked(entry.at("record").get<IngestRecord>(), now);
      } catch (const Error&) {
        // Accepted when logged; a window change since then may reject it now.
      }
    } else if (op == "expire") {
      expire_locked(now);
    }
  }
}

void RollingStore::append_log(const nlohmann::json& entry) {
  const std::string line = entry.dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), log_) != line.size()) {
    throw Error(ErrorCode::kIo, "write-ahead log append failed");
  }
  fsync_file(log_);
}

void RollingStore::checkpoint() {
  if (!bound_dir_) throw Error(ErrorCode::kInvalidArgument, "store is not bound to a directory");
  std::unique_lock lock(mutex_);
  persist_locked(*bound_dir_);
  std::fclose(log_);
  log_ = std::fopen((*bound_dir_ / kLogFile).c_str(), "wb");
  if (log_ == nullptr) throw Error(ErrorCode::kIo, "cannot truncate write-ahead log");
  fsync_file(log_);
}

PairedFileSource::PairedFileSource(const fs::path& vectors, const fs::path& metadata)
    : vectors_path_(vectors),
      metadata_path_(metadata),
      vectors_(std::make_unique<SirvReader>(vectors)),
      metadata_(metadata) {
  if (!metadata_) throw Error(ErrorCode::kIo, "cannot open metadata file " + metadata.string());
}

std::optional<std::uint64_t> PairedFileSource::size_hint() const { return vectors_->count(); }

void PairedFileSource::seek(std::uint64_t position) {
  vectors_ = std::make_unique<SirvReader>(vectors_path_);
  metadata_ = std::ifstream(metadata_path_);
  vectors_->skip(position);
  std::string line;
  for (std::uint64_t k = 0; k < position && std::getline(metadata_, line); ++k) {
  }
  position_ = std::min<std::uint64_t>(position, vectors_->count());
}

std::optional<StreamItem> PairedFileSource::next() {
  auto vec = vectors_->next();
  if (!vec) return std::nullopt;
  ++position_;
  StreamItem item;
  item.position = position_;
  std::string line;
  if (!std::getline(metadata_, line)) {
    item.error = "record " + vec->id + ": metadata sidecar ended early";
    return item;
  }
  try {
    auto meta = nlohmann::json::parse(line).get<ItemMetadata>();
    if (meta.id != vec->id) {
      item.error = "record " + std::to_string(position_ - 1) + ": metadata id '" + meta.id +
                   "' does not match vector id '" + vec->id + "'";
      return item;
    }
    item.record = IngestRecord{meta.id, meta.product_id, meta.title,
                               EmbeddingVector(std::move(vec->values)), meta.timestamp};
  } catch (const std::exception& e) {
    item.error = "record " + std::to_string(position_ - 1) + " (" + vec->id + "): " + e.what();
  }
  return item;
}

JsonlRecordSource::JsonlRecordSource(std::vector<std::string> lines) : lines_(std::move(lines)) {}

JsonlRecordSource JsonlRecordSource::from_text(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
    start = end + 1;
  }
  return JsonlRecordSource(std::move(lines));
}

std::optional<StreamItem> JsonlRecordSource::next() {
  if (position_ >= lines_.size()) return std::nullopt;
  StreamItem item;
  const std::string& line = lines_[position_++];
  item.position = position_;
  try {
    item.record = nlohmann::json::parse(line).get<IngestRecord>();
  } catch (const std::exception& e) {
    item.error = "line " + std::to_string(position_) + ": " + e.what();
  }
  return item;
}

ConsumeStats consume_stream(RollingStore& store, RecordSource& source, const ConsumeOptions& options) {
  const auto now = [&] {
    return options.clock ? options.clock()
                         : std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
  };
  const auto warn = [&](const std::string& msg) {
    if (options.on_warning) options.on_warning(msg);
  };
  const auto save_checkpoint = [&](std::uint64_t position) {
    if (!options.checkpoint) return;
    const fs::path tmp = options.checkpoint->string() + ".tmp";
    write_file(tmp, std::to_string(position) + "\n");
    fs::rename(tmp, *options.checkpoint);
  };

  ConsumeStats stats;
  if (options.checkpoint && fs::exists(*options.checkpoint)) {
    stats.position = std::stoull(read_file(*options.checkpoint));
    source.seek(stats.position);
  }

  std::uint64_t consumed = 0;
  bool exhausted = false;
  while (!exhausted) {
    std::size_t in_batch = 0;
    while (in_batch < std::max<std::size_t>(1, options.batch_size)) {
      if (options.max_elements && consumed >= *options.max_elements) return stats;
      auto item = source.next();
      if (!item) {
        exhausted = true;
        break;
      }
      ++consumed;
      ++in_batch;
      if (item->record) {
        try {
          if (store.ingest(*item->record, now()) == IngestResult::kUnchanged) {
            ++stats.unchanged;
          } else {
            ++stats.ingested;
          }
        } catch (const Error& e) {
          ++stats.rejected;
          warn(std::string(error_code_name(e.code())) + ": " + e.what());
        }
      } else {
        ++stats.rejected;
        warn("malformed: " + item->error);
      }
      stats.position = item->position;
    }
    if (in_batch > 0) {
      ++stats.batches;
      // The store's log already holds every applied record, so the resume
      // point can only trail what is durable.
      save_checkpoint(stats.position);
      store.expire(now());
    }
  }
  return stats;
}

}  // namespace lookalike
