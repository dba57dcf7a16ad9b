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

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "lookalike/hamming_index.hpp"

namespace lookalike {

struct TokenizedTitle {
  std::vector<std::string> tokens;
  std::map<std::string, std::size_t, std::less<>> tf;

  bool contains(std::string_view term) const { return tf.find(term) != tf.end(); }
};

/// Lowercases, then splits on runs of non-alphanumeric code points. Two words
/// joined by a single hyphen also yield their concatenation, emitted right
/// after the second word: "E-Cigarette" -> e, cigarette, ecigarette.
///
/// Case folding covers ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
/// Non-ASCII code points count as alphanumeric unless they fall in the
/// punctuation, symbol or emoji blocks.
TokenizedTitle tokenize(std::string_view text);

/// Reduces a user-supplied term to the single token the tokenizer would index
/// for it ("E-Cigarette" -> "ecigarette"). Throws kInvalidArgument when
/// nothing alphanumeric remains.
std::string normalize_term(std::string_view raw);

/// OR over clauses, AND within a clause. No clauses matches everything.
class TextPredicate {
 public:
  TextPredicate() = default;
  explicit TextPredicate(const std::vector<std::vector<std::string>>& clauses);

  /// Appends a clause; terms are normalized.
  void add_clause(const std::vector<std::string>& terms);

  const std::vector<std::vector<std::string>>& clauses() const noexcept { return clauses_; }
  bool empty() const noexcept { return clauses_.empty(); }

  friend bool operator==(const TextPredicate&, const TextPredicate&) = default;

 private:
  std::vector<std::vector<std::string>> clauses_;
};

/// {"any_of": [{"all_of": ["term", ...]}, ...]}
void to_json(nlohmann::json& j, const TextPredicate& p);
void from_json(const nlohmann::json& j, TextPredicate& p);

bool matches(const TextPredicate& p, const TokenizedTitle& title);

/// Term -> ascending slot postings for one segment's titles.
class TermIndex {
 public:
  void add(Slot slot, const TokenizedTitle& title);
  void remove(Slot slot, const TokenizedTitle& title);

  /// Slots whose titles satisfy `p`, ascending. `live` is returned for the
  /// empty predicate.
  std::vector<Slot> match(const TextPredicate& p, const std::vector<Slot>& live) const;

 private:
  std::unordered_map<std::string, std::vector<Slot>> postings_;
};

struct TextHit {
  std::string id;
  double score = 0.0;
};

/// tf-idf cosine retrieval over a snapshot of titles, with
/// idf(t) = ln(1 + |corpus| / df(t)). Query terms unseen in the corpus carry
/// no weight.
class TextCorpus {
 public:
  TextCorpus() = default;
  void add(std::string id, const TokenizedTitle& title);
  /// Computes idf and document norms; call once after the last add().
  void finalize();

  std::size_t size() const noexcept { return docs_.size(); }
  double idf(std::string_view term) const;

  /// Every document scored, ordered (score desc, id asc), truncated to n.
  std::vector<TextHit> top(const TokenizedTitle& query, std::size_t n,
                           std::optional<std::string_view> exclude_id = std::nullopt) const;

 private:
  struct Doc {
    std::string id;
    double norm = 0.0;
  };
  struct Posting {
    std::size_t doc;
    std::size_t tf;
  };

  std::vector<Doc> docs_;
  std::vector<std::map<std::string, std::size_t, std::less<>>> pending_tf_;
  std::map<std::string, std::vector<Posting>, std::less<>> postings_;
  std::map<std::string, double, std::less<>> idf_;
  bool finalized_ = false;
};

std::vector<TextHit> text_candidates(std::string_view query_title, const TextCorpus& corpus,
                                     std::size_t n,
                                     std::optional<std::string_view> exclude_id = std::nullopt);

}  // namespace lookalike
