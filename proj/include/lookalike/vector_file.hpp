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
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace lookalike {

/// SIRV vector file, little-endian throughout:
///   "SIRV" | u32 version (1) | u32 dim | u64 count
///   count x ( u16 id_len | id bytes (UTF-8) | dim x f32 )
inline constexpr std::uint32_t kSirvVersion = 1;

struct VectorRecord {
  std::string id;
  std::vector<float> values;

  friend bool operator==(const VectorRecord&, const VectorRecord&) = default;
};

/// Streams records; framing problems raise kIntegrity with the byte offset.
class SirvReader {
 public:
  explicit SirvReader(const std::filesystem::path& path);

  std::uint32_t dim() const noexcept { return dim_; }
  std::uint64_t count() const noexcept { return count_; }
  std::uint64_t records_read() const noexcept { return read_; }

  /// nullopt after the last declared record.
  std::optional<VectorRecord> next();
  /// Skips `n` records without decoding floats.
  void skip(std::uint64_t n);

 private:
  void read_exact(char* dst, std::size_t n, const char* what);

  std::filesystem::path path_;
  std::ifstream in_;
  std::uint32_t dim_ = 0;
  std::uint64_t count_ = 0;
  std::uint64_t read_ = 0;
  std::uint64_t offset_ = 0;
};

/// Writes the header up front and patches the record count in close().
class SirvWriter {
 public:
  SirvWriter(const std::filesystem::path& path, std::uint32_t dim);
  ~SirvWriter();
  SirvWriter(const SirvWriter&) = delete;
  SirvWriter& operator=(const SirvWriter&) = delete;

  void write(const std::string& id, const std::vector<float>& values);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::uint32_t dim_;
  std::uint64_t count_ = 0;
  bool closed_ = false;
};

struct VectorFile {
  std::uint32_t dim = 0;
  std::vector<VectorRecord> records;
};

VectorFile read_vector_file(const std::filesystem::path& path);
void write_vector_file(const std::filesystem::path& path, std::uint32_t dim,
                       const std::vector<VectorRecord>& records);

}  // namespace lookalike
