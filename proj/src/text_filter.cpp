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

#include "lookalike/text_filter.hpp"

#include <algorithm>
#include <cmath>

#include "lookalike/error.hpp"

namespace lookalike {
namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one code point; malformed sequences yield kInvalid and consume one byte.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char lead = byte(i);
  if (lead < 0x80) {
    ++i;
    return lead;
  }
  std::size_t extra;
  char32_t cp;
  if ((lead & 0xE0) == 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3;
    cp = lead & 0x07;
  } else {
    ++i;
    return kInvalid;
  }
  if (i + extra >= s.size()) {
    ++i;
    return kInvalid;
  }
  for (std::size_t k = 1; k <= extra; ++k) {
    if ((byte(i + k) & 0xC0) != 0x80) {
      ++i;
      return kInvalid;
    }
    cp = (cp << 6) | (byte(i + k) & 0x3F);
  }
  i += extra + 1;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0xC0) return c;
  if (c <= 0xDE) return c == 0xD7 ? c : c + 32;
  if ((c >= 0x100 && c <= 0x137) || (c >= 0x14A && c <= 0x177)) return c | 1;
  if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E)) return (c & 1) ? c + 1 : c;
  if (c == 0x178) return 0xFF;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

bool is_alnum(char32_t c) {
  if (c == kInvalid) return false;
  if (c < 0x80) return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  if (c < 0xC0) return c == 0xAA || c == 0xB5 || c == 0xBA;
  if (c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2000 && c <= 0x2BFF) return false;  // punctuation, symbols, arrows, shapes
  if (c >= 0x3000 && c <= 0x303F) return false;  // CJK punctuation
  if (c >= 0xFE30 && c <= 0xFE4F) return false;
  if (c >= 0xFF00 && c <= 0xFF0F) return false;
  if (c >= 0xFF1A && c <= 0xFF20) return false;
  if (c >= 0xFFF0 && c <= 0xFFFF) return false;
  if (c >= 0x1F000 && c <= 0x1FAFF) return false;  // emoji and pictographs
  return true;
}

}  // namespace

TokenizedTitle tokenize(std::string_view text) {
  TokenizedTitle out;
  std::string word;
  std::string previous;
  bool hyphen_link = false;   // the separator run before `word` was exactly "-"
  std::size_t separator_len = 0;
  bool separator_is_hyphen = false;

  const auto emit = [&](std::string token) {
    ++out.tf[token];
    out.tokens.push_back(std::move(token));
  };
  const auto flush = [&] {
    if (word.empty()) return;
    emit(word);
    if (hyphen_link && !previous.empty()) emit(previous + word);
    previous = std::move(word);
    word.clear();
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = next_code_point(text, i);
    if (is_alnum(cp)) {
      if (word.empty()) {
        hyphen_link = separator_len == 1 && separator_is_hyphen;
        separator_len = 0;
      }
      append_utf8(word, to_lower(cp));
    } else {
      if (!word.empty()) {
        flush();
        separator_len = 0;
        separator_is_hyphen = false;
      }
      if (separator_len == 0) separator_is_hyphen = cp == '-';
      ++separator_len;
    }
  }
  flush();
  return out;
}

std::string normalize_term(std::string_view raw) {
  // Concatenated lowercase alphanumerics: the token a hyphen-joined title emits.
  std::string out;
  std::size_t i = 0;
  while (i < raw.size()) {
    const char32_t cp = next_code_point(raw, i);
    if (is_alnum(cp)) append_utf8(out, to_lower(cp));
  }
  if (out.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "predicate term '" + std::string(raw) + "' has no alphanumeric characters");
  }
  return out;
}

TextPredicate::TextPredicate(const std::vector<std::vector<std::string>>& clauses) {
  for (const auto& clause : clauses) add_clause(clause);
}

void TextPredicate::add_clause(const std::vector<std::string>& terms) {
  if (terms.empty()) throw Error(ErrorCode::kInvalidArgument, "predicate clause has no terms");
  std::vector<std::string> normalized;
  normalized.reserve(terms.size());
  for (const auto& term : terms) normalized.push_back(normalize_term(term));
  std::sort(normalized.begin(), normalized.end());
  normalized.erase(std::unique(normalized.begin(), normalized.end()), normalized.end());
  clauses_.push_back(std::move(normalized));
}

void to_json(nlohmann::json& j, const TextPredicate& p) {
  auto any_of = nlohmann::json::array();
  for (const auto& clause : p.clauses()) any_of.push_back({{"all_of", clause}});
  j = nlohmann::json{{"any_of", any_of}};
}

void from_json(const nlohmann::json& j, TextPredicate& p) {
  if (!j.is_object() || !j.contains("any_of") || !j["any_of"].is_array()) {
    throw Error(ErrorCode::kInvalidArgument, "predicate must be {\"any_of\": [...]}");
  }
  TextPredicate out;
  for (const auto& clause : j["any_of"]) {
    if (!clause.is_object() || !clause.contains("all_of") || !clause["all_of"].is_array()) {
      throw Error(ErrorCode::kInvalidArgument, "predicate clause must be {\"all_of\": [...]}");
    }
    std::vector<std::string> terms;
    for (const auto& term : clause["all_of"]) {
      if (!term.is_string()) throw Error(ErrorCode::kInvalidArgument, "predicate terms must be strings");
      terms.push_back(term.get<std::string>());
    }
    out.add_clause(terms);
  }
  p = std::move(out);
}

bool matches(const TextPredicate& p, const TokenizedTitle& title) {
  if (p.empty()) return true;
  return std::any_of(p.clauses().begin(), p.clauses().end(), [&](const auto& clause) {
    return std::all_of(clause.begin(), clause.end(),
                       [&](const std::string& term) { return title.contains(term); });
  });
}

void TermIndex::add(Slot slot, const TokenizedTitle& title) {
  for (const auto& [term, count] : title.tf) {
    auto& list = postings_[term];
    const auto pos = std::lower_bound(list.begin(), list.end(), slot);
    if (pos == list.end() || *pos != slot) list.insert(pos, slot);
  }
}

void TermIndex::remove(Slot slot, const TokenizedTitle& title) {
  for (const auto& [term, count] : title.tf) {
    const auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    auto& list = it->second;
    const auto pos = std::lower_bound(list.begin(), list.end(), slot);
    if (pos != list.end() && *pos == slot) list.erase(pos);
    if (list.empty()) postings_.erase(it);
  }
}

std::vector<Slot> TermIndex::match(const TextPredicate& p, const std::vector<Slot>& live) const {
  if (p.empty()) return live;
  std::vector<Slot> result;
  for (const auto& clause : p.clauses()) {
    std::vector<const std::vector<Slot>*> lists;
    bool dead = false;
    for (const auto& term : clause) {
      const auto it = postings_.find(term);
      if (it == postings_.end()) {
        dead = true;
        break;
      }
      lists.push_back(&it->second);
    }
    if (dead) continue;
    std::sort(lists.begin(), lists.end(), [](auto* a, auto* b) { return a->size() < b->size(); });
    std::vector<Slot> acc = *lists.front();
    std::vector<Slot> tmp;
    for (std::size_t k = 1; k < lists.size() && !acc.empty(); ++k) {
      tmp.clear();
      std::set_intersection(acc.begin(), acc.end(), lists[k]->begin(), lists[k]->end(),
                            std::back_inserter(tmp));
      acc.swap(tmp);
    }
    tmp.clear();
    std::set_union(result.begin(), result.end(), acc.begin(), acc.end(), std::back_inserter(tmp));
    result.swap(tmp);
  }
  return result;
}

void TextCorpus::add(std::string id, const TokenizedTitle& title) {
  if (finalized_) throw Error(ErrorCode::kInvalidArgument, "text corpus already finalized");
  docs_.push_back({std::move(id), 0.0});
  pending_tf_.emplace_back(title.tf.begin(), title.tf.end());
}

void TextCorpus::finalize() {
  for (std::size_t d = 0; d < pending_tf_.size(); ++d) {
    for (const auto& [term, count] : pending_tf_[d]) postings_[term].push_back({d, count});
  }
  const double n = static_cast<double>(docs_.size());
  for (const auto& [term, list] : postings_) {
    idf_[term] = std::log(1.0 + n / static_cast<double>(list.size()));
  }
  std::vector<double> norm2(docs_.size(), 0.0);
  for (const auto& [term, list] : postings_) {
    const double w = idf_[term];
    for (const auto& posting : list) {
      const double x = static_cast<double>(posting.tf) * w;
      norm2[posting.doc] += x * x;
    }
  }
  for (std::size_t d = 0; d < docs_.size(); ++d) docs_[d].norm = std::sqrt(norm2[d]);
  pending_tf_.clear();
  pending_tf_.shrink_to_fit();
  finalized_ = true;
}

double TextCorpus::idf(std::string_view term) const {
  const auto it = idf_.find(term);
  return it == idf_.end() ? 0.0 : it->second;
}

std::vector<TextHit> TextCorpus::top(const TokenizedTitle& query, std::size_t n,
                                     std::optional<std::string_view> exclude_id) const {
  if (!finalized_) throw Error(ErrorCode::kInvalidArgument, "text corpus not finalized");
  std::vector<double> dot(docs_.size(), 0.0);
  double query_norm2 = 0.0;
  for (const auto& [term, count] : query.tf) {
    const auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(term);
    const double q = static_cast<double>(count) * w;
    query_norm2 += q * q;
    for (const auto& posting : it->second) dot[posting.doc] += q * static_cast<double>(posting.tf) * w;
  }
  const double query_norm = std::sqrt(query_norm2);

  std::vector<TextHit> hits;
  hits.reserve(docs_.size());
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    if (exclude_id && docs_[d].id == *exclude_id) continue;
    const double denom = query_norm * docs_[d].norm;
    hits.push_back({docs_[d].id, denom > 0.0 ? dot[d] / denom : 0.0});
  }
  const auto order = [](const TextHit& a, const TextHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  };
  const std::size_t keep = std::min(n, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), order);
  hits.resize(keep);
  return hits;
}

std::vector<TextHit> text_candidates(std::string_view query_title, const TextCorpus& corpus,
                                     std::size_t n, std::optional<std::string_view> exclude_id) {
  return corpus.top(tokenize(query_title), n, exclude_id);
}

}  // namespace lookalike
