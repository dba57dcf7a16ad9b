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
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lookalike {

/// Real-valued image fingerprint. Values are finite and the dimension is
/// positive; the constructor enforces both.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<float> values);

  std::size_t dim() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::span<const float> values() const noexcept { return values_; }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<float> values_;
};

/// Fixed-length bit string. Bit 0 is the most significant bit of the
/// serialized (big-endian) form; internally bit j lives in word j / 64 at
/// shift 63 - j % 64, so word order matches serialization order.
class BinaryCode {
 public:
  BinaryCode() = default;
  explicit BinaryCode(std::size_t length);

  /// Parses a string of '0'/'1' characters; bit 0 is the first character.
  static BinaryCode from_bit_string(std::string_view bits);
  /// Builds a code of `length` bits from the low `length` bits of `value`
  /// (length <= 64), most significant first.
  static BinaryCode from_uint(std::uint64_t value, std::size_t length);
  /// Decodes `(length + 7) / 8` big-endian bytes.
  static BinaryCode from_bytes(std::span<const std::uint8_t> bytes, std::size_t length);

  std::size_t length() const noexcept { return length_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool bit(std::size_t j) const noexcept {
    return (words_[j >> 6] >> (63 - (j & 63))) & 1u;
  }
  void set_bit(std::size_t j, bool value) noexcept;
  void flip_bit(std::size_t j) noexcept;

  /// Reads `count` (1..64) bits starting at `offset`, most significant first.
  std::uint64_t extract(std::size_t offset, std::size_t count) const noexcept;

  BinaryCode complement() const;
  std::string to_bit_string() const;
  std::vector<std::uint8_t> to_bytes() const;

  friend bool operator==(const BinaryCode&, const BinaryCode&) = default;

 private:
  std::size_t length_ = 0;
  std::vector<std::uint64_t> words_;
};

struct CodecConfig {
  std::size_t dim = 0;
  std::size_t code_bits = 256;
  std::size_t subcode_count = 16;
  std::uint64_t projection_seed = 0;

  std::size_t subcode_bits() const noexcept {
    return subcode_count == 0 ? 0 : code_bits / subcode_count;
  }
  /// Throws kInvalidConfig unless dim > 0, code_bits > 0, subcode_count >= 1,
  /// code_bits % subcode_count == 0 and the subcode width is at most 64.
  void validate() const;

  friend bool operator==(const CodecConfig&, const CodecConfig&) = default;
};

/// B random hyperplanes in R^D. Coefficients are row-major (hyperplane j
/// occupies [j * D, (j + 1) * D)).
class ProjectionPlan {
 public:
  ProjectionPlan() = default;
  /// Wraps explicit hyperplanes, e.g. hand-built ones in tests.
  ProjectionPlan(std::uint64_t seed, std::size_t dim_in, std::size_t bits_out,
                 std::vector<double> coefficients);

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t dim_in() const noexcept { return dim_in_; }
  std::size_t bits_out() const noexcept { return bits_out_; }
  std::span<const double> coefficients() const noexcept { return coefficients_; }
  std::span<const double> hyperplane(std::size_t j) const noexcept {
    return std::span<const double>(coefficients_).subspan(j * dim_in_, dim_in_);
  }

 private:
  std::uint64_t seed_ = 0;
  std::size_t dim_in_ = 0;
  std::size_t bits_out_ = 0;
  std::vector<double> coefficients_;
};

/// Deterministic standard-normal hyperplanes keyed only by `seed`.
///
/// The generator is xoshiro256** seeded through SplitMix64 (four successive
/// SplitMix64 outputs form the state). Normals come in pairs from Box-Muller
/// over two consecutive 64-bit outputs a, b:
///   u1 = ((a >> 11) + 1) * 2^-53,  u2 = (b >> 11) * 2^-53,
///   z0 = sqrt(-2 ln u1) cos(2 pi u2),  z1 = sqrt(-2 ln u1) sin(2 pi u2).
/// Values fill the matrix hyperplane-major. tests/oracle/projection_oracle.py
/// is a standalone rendition of the same stream.
ProjectionPlan build_projection_plan(std::uint64_t seed, std::size_t dim_in, std::size_t bits_out);

/// Bit j is 1 iff dot(hyperplane_j, v) >= 0.
BinaryCode binarize(const ProjectionPlan& plan, const EmbeddingVector& v);

struct Subcode {
  std::size_t position = 0;
  std::uint64_t value = 0;

  friend bool operator==(const Subcode&, const Subcode&) = default;
};

std::vector<Subcode> split_subcodes(const BinaryCode& code, std::size_t subcode_count);

/// Popcount of XOR, a word at a time.
std::size_t hamming(const BinaryCode& a, const BinaryCode& b);

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Config plus its materialized plan.
class Codec {
 public:
  explicit Codec(const CodecConfig& config);

  const CodecConfig& config() const noexcept { return config_; }
  const ProjectionPlan& plan() const noexcept { return plan_; }
  BinaryCode encode(const EmbeddingVector& v) const { return binarize(plan_, v); }

 private:
  CodecConfig config_;
  ProjectionPlan plan_;
};

}  // namespace lookalike
