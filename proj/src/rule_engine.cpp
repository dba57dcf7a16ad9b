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

#include "lookalike/rule_engine.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "lookalike/error.hpp"
#include "lookalike/query_engine.hpp"

namespace lookalike {
namespace {

using Clock = std::chrono::steady_clock;

std::string_view combine_name(CombineMode m) {
  switch (m) {
    case CombineMode::kAnd: return "and";
    case CombineMode::kImageOnly: return "image_only";
    case CombineMode::kTextOnly: return "text_only";
  }
  return "and";
}

CombineMode combine_from(std::string_view s) {
  if (s == "and") return CombineMode::kAnd;
  if (s == "image_only") return CombineMode::kImageOnly;
  if (s == "text_only") return CombineMode::kTextOnly;
  throw Error(ErrorCode::kInvalidArgument, "unknown combine mode '" + std::string(s) + "'");
}

bool image_required(const Rule& rule) { return rule.combine != CombineMode::kTextOnly; }

bool text_required(const Rule& rule) {
  return rule.predicate.has_value() && rule.combine != CombineMode::kImageOnly;
}

// Score order of simulation hits: distance ascending for threshold rules,
// cosine descending for floor rules, then id.
void sort_hits(const Rule& rule, std::vector<SimulationHit>& hits) {
  const bool by_cosine = rule.uses_cosine() && image_required(rule);
  std::sort(hits.begin(), hits.end(), [&](const SimulationHit& a, const SimulationHit& b) {
    if (a.score != b.score) return by_cosine ? a.score > b.score : a.score < b.score;
    return a.id < b.id;
  });
}

}  // namespace

void Rule::validate(const CodecConfig& codec) const {
  if (seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "rule needs at least one seed");
  for (const auto& seed : seeds) {
    if (seed.code.length() != codec.code_bits) {
      throw Error(ErrorCode::kShape, "seed " + seed.id + " code length does not match codec");
    }
    if (seed.embedding && seed.embedding->dim() != codec.dim) {
      throw Error(ErrorCode::kShape, "seed " + seed.id + " embedding dim does not match codec");
    }
  }
  if (const auto* h = std::get_if<HammingThreshold>(&threshold)) {
    if (h->max_distance > codec.code_bits) {
      throw Error(ErrorCode::kInvalidArgument, "hamming threshold exceeds code length");
    }
  } else {
    const double sigma = std::get<CosineFloor>(threshold).min_cosine;
    if (!(sigma >= -1.0 && sigma <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "cosine floor must lie in [-1, 1]");
    }
    for (const auto& seed : seeds) {
      if (!seed.embedding) {
        throw Error(ErrorCode::kInvalidArgument, "cosine rules need seed embeddings (seed " + seed.id + ")");
      }
    }
  }
}

void to_json(nlohmann::json& j, const Rule& r) {
  auto seeds = nlohmann::json::array();
  for (const auto& s : r.seeds) {
    nlohmann::json seed = {{"id", s.id}, {"code", s.code.to_bit_string()}};
    if (s.embedding) {
      seed["embedding"] = std::vector<float>(s.embedding->values().begin(), s.embedding->values().end());
    }
    seeds.push_back(std::move(seed));
  }
  nlohmann::json threshold;
  if (const auto* h = std::get_if<HammingThreshold>(&r.threshold)) {
    threshold = {{"hamming", h->max_distance}};
  } else {
    threshold = {{"cosine", std::get<CosineFloor>(r.threshold).min_cosine}};
  }
  j = nlohmann::json{{"id", r.id},
                     {"name", r.name},
                     {"seeds", seeds},
                     {"threshold", threshold},
                     {"predicate", nullptr},
                     {"combine", combine_name(r.combine)},
                     {"created", format_timestamp(r.created)},
                     {"updated", format_timestamp(r.updated)},
                     {"status", r.status == RuleStatus::kFinalized ? "finalized" : "draft"}};
  if (r.predicate) j["predicate"] = *r.predicate;
}

Rule rule_from_json(const nlohmann::json& j, const Codec& codec) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "rule must be a JSON object");
  Rule r;
  r.id = j.value("id", "");
  r.name = j.value("name", "");
  if (!j.contains("seeds") || !j["seeds"].is_array()) {
    throw Error(ErrorCode::kInvalidArgument, "rule needs a 'seeds' array");
  }
  std::size_t ordinal = 0;
  for (const auto& s : j["seeds"]) {
    Seed seed;
    seed.id = s.value("id", "seed-" + std::to_string(ordinal));
    ++ordinal;
    if (s.contains("embedding") && !s["embedding"].is_null()) {
      seed.embedding = EmbeddingVector(s["embedding"].get<std::vector<float>>());
      seed.code = codec.encode(*seed.embedding);
    } else if (s.contains("code")) {
      seed.code = BinaryCode::from_bit_string(s["code"].get<std::string>());
    } else {
      throw Error(ErrorCode::kInvalidArgument, "seed " + seed.id + " needs an embedding or a code");
    }
    r.seeds.push_back(std::move(seed));
  }
  if (!j.contains("threshold") || !j["threshold"].is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "rule needs a 'threshold' object");
  }
  const auto& t = j["threshold"];
  if (t.contains("hamming") == t.contains("cosine")) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must set exactly one of 'hamming' or 'cosine'");
  }
  if (t.contains("hamming")) {
    r.threshold = HammingThreshold{t["hamming"].get<std::size_t>()};
  } else {
    r.threshold = CosineFloor{t["cosine"].get<double>()};
  }
  if (j.contains("predicate") && !j["predicate"].is_null()) r.predicate = j["predicate"].get<TextPredicate>();
  r.combine = combine_from(j.value("combine", "and"));
  if (j.contains("created")) r.created = parse_timestamp(j["created"].get<std::string>());
  if (j.contains("updated")) r.updated = parse_timestamp(j["updated"].get<std::string>());
  r.status = j.value("status", "draft") == "finalized" ? RuleStatus::kFinalized : RuleStatus::kDraft;
  r.validate(codec.config());
  return r;
}

RuleDecision evaluate_rule(const Rule& rule, const BinaryCode& code, const EmbeddingVector* embedding,
                           const TokenizedTitle& title) {
  RuleDecision d;
  if (image_required(rule)) {
    if (const auto* h = std::get_if<HammingThreshold>(&rule.threshold)) {
      std::size_t best = std::numeric_limits<std::size_t>::max();
      for (const auto& seed : rule.seeds) {
        const std::size_t dist = hamming(code, seed.code);
        if (dist < best) {
          best = dist;
          d.best_seed = seed.id;
        }
      }
      d.score = static_cast<double>(best);
      d.image_match = best <= h->max_distance;
    } else {
      if (embedding == nullptr) {
        throw Error(ErrorCode::kInvalidArgument, "cosine rule needs the record embedding");
      }
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& seed : rule.seeds) {
        double c;
        try {
          c = cosine(*embedding, *seed.embedding);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kDegenerateVector) throw;
          continue;
        }
        if (c > best) {
          best = c;
          d.best_seed = seed.id;
        }
      }
      d.score = best;
      d.image_match = best >= std::get<CosineFloor>(rule.threshold).min_cosine;
    }
  }
  d.text_match = rule.predicate ? matches(*rule.predicate, title) : true;
  switch (rule.combine) {
    case CombineMode::kAnd: d.flagged = d.image_match && d.text_match; break;
    case CombineMode::kImageOnly: d.flagged = d.image_match; break;
    case CombineMode::kTextOnly: d.flagged = d.text_match; break;
  }
  return d;
}

RuleDecision evaluate_rule(const Rule& rule, const Codec& codec, const IngestRecord& record) {
  return evaluate_rule(rule, codec.encode(record.embedding), &record.embedding, tokenize(record.title));
}

std::vector<SimulationHit> simulation_hits(const Rule& rule, const RollingStore& sample) {
  rule.validate(sample.config().codec);
  const auto view = sample.read();
  std::vector<SimulationHit> hits;

  if (!image_required(rule)) {
    const TextPredicate predicate = rule.predicate.value_or(TextPredicate{});
    for (const auto& [bucket, segment] : view.segments()) {
      const AllowList allow = segment.prefilter(predicate);
      for (Slot s : allow.slots()) {
        hits.push_back({segment.index().id_at(s), "", 0.0, segment.info(s).title});
      }
    }
    sort_hits(rule, hits);
    return hits;
  }

  const TextPredicate* predicate = text_required(rule) ? &*rule.predicate : nullptr;

  if (const auto* h = std::get_if<HammingThreshold>(&rule.threshold)) {
    std::map<std::string, SimulationHit> best;
    for (const auto& seed : rule.seeds) {
      SearchParams params;
      params.k = std::numeric_limits<std::size_t>::max();
      params.radius = h->max_distance;
      for (const auto& [bucket, segment] : view.segments()) {
        std::optional<AllowList> allow;
        if (predicate) {
          allow = segment.prefilter(*predicate);
          if (allow->count() == 0) continue;
        }
        for (const auto& hit : segment.index().search(seed.code, params, allow ? &*allow : nullptr)) {
          if (hit.hamming_distance > h->max_distance) continue;
          const double score = static_cast<double>(hit.hamming_distance);
          auto [it, inserted] = best.try_emplace(hit.id, SimulationHit{hit.id, seed.id, score, ""});
          if (!inserted && score < it->second.score) {
            it->second.best_seed = seed.id;
            it->second.score = score;
          }
          if (inserted) it->second.title = segment.find_info(hit.id)->title;
        }
      }
    }
    for (auto& [id, hit] : best) hits.push_back(std::move(hit));
  } else {
    for (const auto& [bucket, segment] : view.segments()) {
      const std::vector<Slot> slots =
          predicate ? segment.prefilter(*predicate).slots() : segment.index().live_slots();
      for (Slot s : slots) {
        const auto* e = segment.index().embedding_at(s);
        if (e == nullptr) {
          throw Error(ErrorCode::kInvalidArgument, "cosine rules need a sample store with embeddings");
        }
        const RuleDecision d = evaluate_rule(rule, segment.index().code_at(s), e, segment.info(s).tokens);
        if (d.image_match) {
          hits.push_back({segment.index().id_at(s), d.best_seed, d.score, segment.info(s).title});
        }
      }
    }
  }
  sort_hits(rule, hits);
  return hits;
}

void to_json(nlohmann::json& j, const SimulationReport& r) {
  nlohmann::json hits = nlohmann::json::array();
  for (const auto& h : r.top_hits)
    hits.push_back({{"id", h.id}, {"best_seed", h.best_seed}, {"score", h.score}, {"title", h.title}});
  j = {{"sample_size", r.sample_size},
       {"hit_count", r.hit_count},
       {"selectivity", r.selectivity},
       {"top_hits", std::move(hits)},
       {"elapsed_ms", r.elapsed_ms}};
}

SimulationReport simulate(const Rule& rule, const RollingStore& sample, std::size_t limit) {
  const auto start = Clock::now();
  SimulationReport report;
  auto hits = simulation_hits(rule, sample);
  report.sample_size = sample.item_count();
  report.hit_count = hits.size();
  report.selectivity = report.sample_size == 0
                           ? 0.0
                           : static_cast<double>(report.hit_count) / static_cast<double>(report.sample_size);
  if (hits.size() > limit) hits.resize(limit);
  report.top_hits = std::move(hits);
  report.elapsed_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  return report;
}

double SweepProgress::fraction() const {
  const auto t = total.load();
  if (t == 0) return done.load() ? 1.0 : 0.0;
  return std::min(1.0, static_cast<double>(scanned.load()) / static_cast<double>(t));
}

void to_json(nlohmann::json& j, const SweepReport& r) {
  auto flagged = nlohmann::json::array();
  for (const auto& f : r.flagged) {
    flagged.push_back({{"item_id", f.item_id},
                       {"rule_id", f.rule_id},
                       {"best_seed", f.best_seed},
                       {"score", f.score},
                       {"predicate_matched", f.predicate_matched}});
  }
  j = nlohmann::json{{"scanned", r.scanned},
                     {"skipped", r.skipped},
                     {"flagged", flagged},
                     {"flagged_count", r.flagged.size()},
                     {"throughput_per_s", r.throughput_per_s},
                     {"progress", r.progress},
                     {"elapsed_ms", r.elapsed_ms}};
}

namespace {

struct Evaluated {
  std::string id;
  BinaryCode code;
  const EmbeddingVector* embedding;
  TokenizedTitle title;
};

void evaluate_partition(const std::vector<Rule>& rules, const std::vector<Evaluated>& items,
                        std::size_t begin, std::size_t end, std::vector<SweepFlag>& out) {
  for (std::size_t i = begin; i < end; ++i) {
    const auto& item = items[i];
    for (const auto& rule : rules) {
      const RuleDecision d = evaluate_rule(rule, item.code, item.embedding, item.title);
      if (d.flagged) out.push_back({item.id, rule.id, d.best_seed, d.score, d.text_match && rule.predicate});
    }
  }
}

void evaluate_batch(const std::vector<Rule>& rules, const std::vector<Evaluated>& items,
                    std::size_t threads, std::vector<SweepFlag>& flagged) {
  threads = std::max<std::size_t>(1, std::min(threads, items.size()));
  if (threads <= 1) {
    evaluate_partition(rules, items, 0, items.size(), flagged);
    return;
  }
  std::vector<std::vector<SweepFlag>> parts(threads);
  std::vector<std::thread> workers;
  const std::size_t chunk = (items.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(items.size(), begin + chunk);
    workers.emplace_back([&, t, begin, end] { evaluate_partition(rules, items, begin, end, parts[t]); });
  }
  for (auto& w : workers) w.join();
  for (auto& part : parts) flagged.insert(flagged.end(), part.begin(), part.end());
}

void finish_report(SweepReport& report, Clock::time_point start) {
  std::sort(report.flagged.begin(), report.flagged.end(), [](const SweepFlag& a, const SweepFlag& b) {
    if (a.item_id != b.item_id) return a.item_id < b.item_id;
    return a.rule_id < b.rule_id;
  });
  report.elapsed_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  report.throughput_per_s =
      report.elapsed_ms > 0.0 ? static_cast<double>(report.scanned) / (report.elapsed_ms / 1000.0) : 0.0;
  report.progress = 1.0;
}

void require_finalized(const std::vector<Rule>& rules) {
  for (const auto& r : rules) {
    if (r.status != RuleStatus::kFinalized) {
      throw Error(ErrorCode::kInvalidArgument, "rule " + r.id + " is not finalized");
    }
  }
}

}  // namespace

SweepReport sweep(const std::vector<Rule>& rules, const Codec& codec, RecordSource& corpus,
                  const SweepOptions& options) {
  require_finalized(rules);
  for (const auto& r : rules) r.validate(codec.config());
  const auto start = Clock::now();
  SweepReport report;
  if (options.progress) {
    if (const auto hint = corpus.size_hint()) options.progress->total = *hint;
  }

  std::vector<IngestRecord> records;
  std::vector<Evaluated> items;
  bool exhausted = false;
  while (!exhausted) {
    records.clear();
    while (records.size() < std::max<std::size_t>(1, options.batch_size)) {
      auto item = corpus.next();
      if (!item) {
        exhausted = true;
        break;
      }
      if (!item->record) {
        ++report.skipped;
        if (options.on_warning) options.on_warning("skipped malformed record: " + item->error);
        continue;
      }
      if (item->record->embedding.dim() != codec.config().dim) {
        ++report.skipped;
        if (options.on_warning) options.on_warning("skipped record " + item->record->id + ": dim mismatch");
        continue;
      }
      records.push_back(std::move(*item->record));
    }
    items.clear();
    items.reserve(records.size());
    for (const auto& r : records) items.push_back({r.id, codec.encode(r.embedding), &r.embedding, tokenize(r.title)});
    const std::size_t before = report.flagged.size();
    evaluate_batch(rules, items, options.threads, report.flagged);
    report.scanned += items.size();
    if (options.progress) {
      options.progress->scanned += items.size();
      options.progress->flagged += report.flagged.size() - before;
    }
  }
  finish_report(report, start);
  if (options.progress) options.progress->done = true;
  return report;
}

SweepReport sweep_store(const std::vector<Rule>& rules, const RollingStore& store) {
  require_finalized(rules);
  for (const auto& r : rules) r.validate(store.config().codec);
  const auto start = Clock::now();
  SweepReport report;
  const auto view = store.read();
  std::vector<Evaluated> items;
  for (const auto& [bucket, segment] : view.segments()) {
    for (Slot s : segment.index().live_slots()) {
      items.push_back({segment.index().id_at(s), segment.index().code_at(s), segment.index().embedding_at(s),
                       segment.info(s).tokens});
    }
  }
  evaluate_batch(rules, items, 1, report.flagged);
  report.scanned = items.size();
  finish_report(report, start);
  return report;
}

RuleBook::RuleBook(RuleBook&& other) noexcept {
  std::unique_lock lock(other.mutex_);
  rules_ = std::move(other.rules_);
  next_id_ = other.next_id_;
}

RuleBook& RuleBook::operator=(RuleBook&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    rules_ = std::move(other.rules_);
    next_id_ = other.next_id_;
  }
  return *this;
}

Rule RuleBook::create(Rule rule, const CodecConfig& codec, Timestamp now) {
  rule.validate(codec);
  std::unique_lock lock(mutex_);
  if (rule.id.empty()) {
    do {
      rule.id = "rule-" + std::to_string(next_id_++);
    } while (rules_.count(rule.id) != 0);
  } else if (rules_.count(rule.id) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "rule " + rule.id + " already exists");
  }
  rule.created = now;
  rule.updated = now;
  rule.status = RuleStatus::kDraft;
  rules_[rule.id] = rule;
  return rule;
}

std::optional<Rule> RuleBook::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = rules_.find(id);
  if (it == rules_.end()) return std::nullopt;
  return it->second;
}

Rule RuleBook::update(Rule rule, const CodecConfig& codec, Timestamp now) {
  rule.validate(codec);
  std::unique_lock lock(mutex_);
  const auto it = rules_.find(rule.id);
  if (it == rules_.end()) throw Error(ErrorCode::kNotFound, "rule " + rule.id + " not found");
  if (it->second.status == RuleStatus::kFinalized) {
    throw Error(ErrorCode::kInvalidArgument, "rule " + rule.id + " is finalized and cannot change");
  }
  rule.created = it->second.created;
  rule.updated = now;
  rule.status = RuleStatus::kDraft;
  it->second = rule;
  return rule;
}

Rule RuleBook::finalize(const std::string& id, Timestamp now) {
  std::unique_lock lock(mutex_);
  const auto it = rules_.find(id);
  if (it == rules_.end()) throw Error(ErrorCode::kNotFound, "rule " + id + " not found");
  if (it->second.status != RuleStatus::kFinalized) {
    it->second.status = RuleStatus::kFinalized;
    it->second.updated = now;
  }
  return it->second;
}

std::vector<Rule> RuleBook::list() const {
  std::shared_lock lock(mutex_);
  std::vector<Rule> out;
  for (const auto& [id, rule] : rules_) out.push_back(rule);
  return out;
}

std::vector<Rule> RuleBook::snapshot(const std::vector<std::string>& ids) const {
  std::shared_lock lock(mutex_);
  std::vector<Rule> out;
  for (const auto& id : ids) {
    const auto it = rules_.find(id);
    if (it == rules_.end()) throw Error(ErrorCode::kNotFound, "rule " + id + " not found");
    out.push_back(it->second);
  }
  return out;
}

nlohmann::json RuleBook::to_json() const {
  std::shared_lock lock(mutex_);
  auto rules = nlohmann::json::array();
  for (const auto& [id, rule] : rules_) rules.push_back(rule);
  return {{"next_id", next_id_}, {"rules", rules}};
}

RuleBook RuleBook::from_json(const nlohmann::json& j, const Codec& codec) {
  RuleBook book;
  book.next_id_ = j.value("next_id", std::uint64_t{1});
  for (const auto& r : j.value("rules", nlohmann::json::array())) {
    Rule rule = rule_from_json(r, codec);
    book.rules_[rule.id] = std::move(rule);
  }
  return book;
}

void RuleBook::save(const std::filesystem::path& path) const {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << to_json().dump(2) << "\n";
    if (!out) throw Error(ErrorCode::kIo, "failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

RuleBook RuleBook::load(const std::filesystem::path& path, const Codec& codec) {
  if (!std::filesystem::exists(path)) return RuleBook{};
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(nlohmann::json::parse(ss.str()), codec);
}

}  // namespace lookalike
