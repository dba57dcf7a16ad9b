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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "lookalike/codec.hpp"
#include "lookalike/hamming_index.hpp"
#include "lookalike/random.hpp"
#include "lookalike/records.hpp"

namespace testing {

/// Removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lookalike-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline lookalike::BinaryCode random_code(lookalike::Xoshiro256StarStar& rng, std::size_t bits) {
  lookalike::BinaryCode c(bits);
  for (std::size_t j = 0; j < bits; ++j) c.set_bit(j, rng.next() >> 63);
  return c;
}

/// Flips `flips` distinct random bits.
inline lookalike::BinaryCode perturb(lookalike::BinaryCode c, lookalike::Xoshiro256StarStar& rng,
                                     std::size_t flips) {
  std::vector<bool> used(c.length(), false);
  for (std::size_t done = 0; done < flips;) {
    const auto j = rng.below(c.length());
    if (used[j]) continue;
    used[j] = true;
    c.flip_bit(j);
    ++done;
  }
  return c;
}

inline std::vector<float> random_vector(lookalike::NormalSampler& normal, std::size_t dim) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(normal.next());
  return v;
}

inline lookalike::Timestamp ts(const char* iso) {
  return std::chrono::time_point_cast<std::chrono::seconds>(lookalike::parse_timestamp(iso));
}

inline lookalike::IngestRecord record(std::string id, std::string title, std::vector<float> embedding,
                                      lookalike::Timestamp t) {
  return lookalike::IngestRecord{id, "p-" + id, std::move(title), lookalike::EmbeddingVector(std::move(embedding)),
                                 t};
}

/// Exhaustive (distance, id) ranking.
struct OracleItem {
  std::string id;
  lookalike::BinaryCode code;
};

inline std::vector<std::pair<std::size_t, std::string>> brute_force_rank(const std::vector<OracleItem>& items,
                                                                         const lookalike::BinaryCode& query,
                                                                         std::size_t k,
                                                                         std::size_t max_distance) {
  std::vector<std::pair<std::size_t, std::string>> all;
  for (const auto& it : items) {
    std::size_t d = 0;
    for (std::size_t j = 0; j < query.length(); ++j) d += it.code.bit(j) != query.bit(j);
    if (d <= max_distance) all.emplace_back(d, it.id);
  }
  std::sort(all.begin(), all.end());
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace testing
