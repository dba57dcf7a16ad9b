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

#include "doctest.h"
#include "lookalike/error.hpp"
#include "lookalike/text_filter.hpp"

using namespace lookalike;

namespace {

TextPredicate pred(const std::vector<std::vector<std::string>>& clauses) { return TextPredicate(clauses); }

TextCorpus hand_corpus() {
  TextCorpus corpus;
  corpus.add("d1", tokenize("red cotton shirt"));
  corpus.add("d2", tokenize("blue cotton shirt shirt"));
  corpus.add("d3", tokenize("red ceramic lamp"));
  corpus.add("d4", tokenize("blue denim jeans"));
  corpus.add("d5", tokenize("cotton tote bag red"));
  corpus.finalize();
  return corpus;
}

}  // namespace

TEST_CASE("tokenize") {
  const auto t = tokenize("E-Cigarette Starter Kit");
  CHECK(t.tokens == std::vector<std::string>{"e", "cigarette", "ecigarette", "starter", "kit"});
  CHECK(tokenize("").tokens.empty());
  CHECK(tokenize("ABC abc").tf.at("abc") == 2);
  CHECK(tokenize("  --  ,,").tokens.empty());
  CHECK(tokenize("USB-C 2-pack!").tokens == std::vector<std::string>{"usb", "c", "usbc", "2", "pack", "2pack"});
  // only a single hyphen joins
  CHECK(tokenize("a--b").tokens == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("ÉCLAIR Ñandú ΣΟΦΙΑ Москва").tokens ==
        std::vector<std::string>{"éclair", "ñandú", "σοφια", "москва"});
}

TEST_CASE("normalize_term") {
  CHECK(normalize_term("E-Cigarette") == "ecigarette");
  CHECK(normalize_term("  Lamp ") == "lamp");
  try {
    normalize_term(" - ");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("predicate matching") {
  const TextPredicate ecig({{"ecigarette"}});
  CHECK(matches(ecig, tokenize("E-Cigarette Starter Kit")));
  CHECK(matches(TextPredicate{}, tokenize("anything")));
  CHECK_FALSE(matches(pred({{"red", "shirt"}}), tokenize("blue shirt")));
  CHECK(matches(pred({{"red", "shirt"}, {"blue"}}), tokenize("blue shirt")));
  // case invariance
  for (const char* title : {"Red Shirt", "RED SHIRT", "red shirt"})
    CHECK(matches(pred({{"RED", "Shirt"}}), tokenize(title)));
}

TEST_CASE("predicate json round trip") {
  TextPredicate p = pred({{"Lamp"}, {"red", "shirt", "red"}});
  const nlohmann::json j = p;
  CHECK(j.dump() == R"({"any_of":[{"all_of":["lamp"]},{"all_of":["red","shirt"]}]})");
  CHECK(j.get<TextPredicate>() == p);
  CHECK(nlohmann::json::parse(R"({"any_of":[]})").get<TextPredicate>().empty());
}

TEST_CASE("term index") {
  TermIndex index;
  const std::vector<std::string> titles{"red lamp", "blue lamp", "red shirt", "green vase"};
  std::vector<Slot> live;
  for (Slot s = 0; s < titles.size(); ++s) {
    index.add(s, tokenize(titles[s]));
    live.push_back(s);
  }
  CHECK(index.match(pred({{"lamp"}}), live) == std::vector<Slot>{0, 1});
  CHECK(index.match(pred({{"red", "lamp"}}), live) == std::vector<Slot>{0});
  CHECK(index.match(pred({{"red"}, {"vase"}}), live) == std::vector<Slot>{0, 2, 3});
  CHECK(index.match(pred({{"absent"}}), live).empty());
  CHECK(index.match(TextPredicate{}, live) == live);
  // adding a clause never shrinks the match
  CHECK(index.match(pred({{"lamp"}, {"absent"}}), live) == std::vector<Slot>{0, 1});
  index.remove(0, tokenize(titles[0]));
  CHECK(index.match(pred({{"lamp"}}), live) == std::vector<Slot>{1});
}

TEST_CASE("tf-idf ranking equals the reference scores") {
  const auto corpus = hand_corpus();
  // tests/oracle/tfidf_oracle.py "red shirt cotton"
  const auto hits = text_candidates("red shirt cotton", corpus, 10);
  const std::vector<std::pair<std::string, double>> expected{
      {"d1", 1.0000000000000002}, {"d2", 0.7392313943810724}, {"d5", 0.35635188670113765},
      {"d3", 0.1894292573673832}, {"d4", 0.0}};
  REQUIRE(hits.size() == expected.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    CHECK(hits[i].id == expected[i].first);
    CHECK(hits[i].score == doctest::Approx(expected[i].second).epsilon(1e-12));
  }
  // tests/oracle/tfidf_oracle.py "blue shirt glitter"; ties at 0 by id
  const auto second = text_candidates("blue shirt glitter", corpus, 10);
  const std::vector<std::pair<std::string, double>> expected2{
      {"d2", 0.895384067011445}, {"d1", 0.47394241854460334}, {"d4", 0.3133823743695801}, {"d3", 0.0}, {"d5", 0.0}};
  REQUIRE(second.size() == expected2.size());
  for (std::size_t i = 0; i < second.size(); ++i) {
    CHECK(second[i].id == expected2[i].first);
    CHECK(second[i].score == doctest::Approx(expected2[i].second).epsilon(1e-12));
  }
  CHECK(corpus.idf("cotton") == doctest::Approx(std::log(1.0 + 5.0 / 3.0)));
}

TEST_CASE("text candidates truncation and exclusion") {
  const auto corpus = hand_corpus();
  CHECK(text_candidates("red ceramic lamp", corpus, 1)[0].id == "d3");
  const auto excluded = text_candidates("red ceramic lamp", corpus, 10, "d3");
  CHECK(excluded.size() == 4);
  for (const auto& h : excluded) CHECK(h.id != "d3");
  CHECK(text_candidates("red", corpus, 2).size() == 2);
  // deterministic under repetition
  const auto a = text_candidates("cotton shirt", corpus, 5);
  const auto b = text_candidates("cotton shirt", corpus, 5);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
}
