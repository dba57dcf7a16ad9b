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

#include "lookalike/codec.hpp"

#include <bit>
#include <cmath>

#include "lookalike/error.hpp"
#include "lookalike/random.hpp"

namespace lookalike {
namespace {

constexpr std::size_t word_count(std::size_t bits) { return (bits + 63) / 64; }

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::kShape, "embedding has zero dimensions");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::kShape, "embedding value " + std::to_string(i) + " is not finite");
    }
  }
}

BinaryCode::BinaryCode(std::size_t length) : length_(length), words_(word_count(length), 0) {}

BinaryCode BinaryCode::from_bit_string(std::string_view bits) {
  BinaryCode code(bits.size());
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] != '0' && bits[j] != '1') {
      throw Error(ErrorCode::kInvalidArgument, "bit string may only contain 0 and 1");
    }
    code.set_bit(j, bits[j] == '1');
  }
  return code;
}

BinaryCode BinaryCode::from_uint(std::uint64_t value, std::size_t length) {
  if (length == 0 || length > 64) {
    throw Error(ErrorCode::kInvalidArgument, "from_uint length must be in [1, 64]");
  }
  BinaryCode code(length);
  code.words_[0] = value << (64 - length);
  return code;
}

BinaryCode BinaryCode::from_bytes(std::span<const std::uint8_t> bytes, std::size_t length) {
  if (bytes.size() != (length + 7) / 8) {
    throw Error(ErrorCode::kShape, "byte count does not match code length");
  }
  BinaryCode code(length);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    code.words_[i / 8] |= static_cast<std::uint64_t>(bytes[i]) << (56 - 8 * (i % 8));
  }
  // Padding bits past `length` stay zero so equality and popcount are exact.
  if (length % 64 != 0) code.words_.back() &= ~0ULL << (64 - length % 64);
  return code;
}

void BinaryCode::set_bit(std::size_t j, bool value) noexcept {
  const std::uint64_t mask = 1ULL << (63 - (j & 63));
  if (value) {
    words_[j >> 6] |= mask;
  } else {
    words_[j >> 6] &= ~mask;
  }
}

void BinaryCode::flip_bit(std::size_t j) noexcept { words_[j >> 6] ^= 1ULL << (63 - (j & 63)); }

std::uint64_t BinaryCode::extract(std::size_t offset, std::size_t count) const noexcept {
  const std::size_t w = offset >> 6;
  const std::size_t shift = offset & 63;
  if (shift + count <= 64) {
    return (words_[w] << shift) >> (64 - count);
  }
  const std::size_t head = 64 - shift;
  const std::size_t tail = count - head;
  const std::uint64_t high = words_[w] & ((1ULL << head) - 1);
  return (high << tail) | (words_[w + 1] >> (64 - tail));
}

BinaryCode BinaryCode::complement() const {
  BinaryCode out(*this);
  for (auto& word : out.words_) word = ~word;
  if (length_ % 64 != 0) out.words_.back() &= ~0ULL << (64 - length_ % 64);
  return out;
}

std::string BinaryCode::to_bit_string() const {
  std::string out(length_, '0');
  for (std::size_t j = 0; j < length_; ++j) {
    if (bit(j)) out[j] = '1';
  }
  return out;
}

std::vector<std::uint8_t> BinaryCode::to_bytes() const {
  std::vector<std::uint8_t> out((length_ + 7) / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(words_[i / 8] >> (56 - 8 * (i % 8)));
  }
  return out;
}

void CodecConfig::validate() const {
  if (dim == 0) throw Error(ErrorCode::kInvalidConfig, "codec dim must be positive");
  if (code_bits == 0) throw Error(ErrorCode::kInvalidConfig, "code_bits must be positive");
  if (subcode_count == 0) throw Error(ErrorCode::kInvalidConfig, "subcode_count must be >= 1");
  if (code_bits % subcode_count != 0) {
    throw Error(ErrorCode::kInvalidConfig, "code_bits must be a multiple of subcode_count");
  }
  if (subcode_bits() > 64) {
    throw Error(ErrorCode::kInvalidConfig, "subcode width exceeds 64 bits");
  }
}

ProjectionPlan::ProjectionPlan(std::uint64_t seed, std::size_t dim_in, std::size_t bits_out,
                               std::vector<double> coefficients)
    : seed_(seed), dim_in_(dim_in), bits_out_(bits_out), coefficients_(std::move(coefficients)) {
  if (dim_in_ == 0 || bits_out_ == 0) {
    throw Error(ErrorCode::kInvalidConfig, "projection dimensions must be positive");
  }
  if (coefficients_.size() != dim_in_ * bits_out_) {
    throw Error(ErrorCode::kShape, "hyperplane matrix size does not match dimensions");
  }
}

ProjectionPlan build_projection_plan(std::uint64_t seed, std::size_t dim_in, std::size_t bits_out) {
  if (dim_in == 0 || bits_out == 0) {
    throw Error(ErrorCode::kInvalidConfig, "projection dimensions must be positive");
  }
  const std::size_t total = dim_in * bits_out;
  std::vector<double> coefficients(total);
  NormalSampler normal(seed);
  for (auto& c : coefficients) c = normal.next();
  return ProjectionPlan(seed, dim_in, bits_out, std::move(coefficients));
}

BinaryCode binarize(const ProjectionPlan& plan, const EmbeddingVector& v) {
  if (v.dim() != plan.dim_in()) {
    throw Error(ErrorCode::kShape, "embedding dim " + std::to_string(v.dim()) +
                                       " does not match plan dim " + std::to_string(plan.dim_in()));
  }
  const auto values = v.values();
  BinaryCode code(plan.bits_out());
  for (std::size_t j = 0; j < plan.bits_out(); ++j) {
    const auto row = plan.hyperplane(j);
    double dot = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) dot += row[i] * static_cast<double>(values[i]);
    if (dot >= 0.0) code.set_bit(j, true);
  }
  return code;
}

std::vector<Subcode> split_subcodes(const BinaryCode& code, std::size_t subcode_count) {
  if (subcode_count == 0 || code.length() % subcode_count != 0) {
    throw Error(ErrorCode::kInvalidConfig, "code length " + std::to_string(code.length()) +
                                               " is not divisible into " +
                                               std::to_string(subcode_count) + " subcodes");
  }
  const std::size_t width = code.length() / subcode_count;
  if (width > 64) throw Error(ErrorCode::kInvalidConfig, "subcode width exceeds 64 bits");
  std::vector<Subcode> out(subcode_count);
  for (std::size_t p = 0; p < subcode_count; ++p) {
    out[p] = Subcode{p, code.extract(p * width, width)};
  }
  return out;
}

std::size_t hamming(const BinaryCode& a, const BinaryCode& b) {
  if (a.length() != b.length()) {
    throw Error(ErrorCode::kShape, "hamming: code lengths differ");
  }
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t distance = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) distance += std::popcount(wa[i] ^ wb[i]);
  return distance;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::kShape, "cosine: dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double x = a[i];
    const double y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorCode::kDegenerateVector, "cosine of a zero-norm vector is undefined");
  }
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

Codec::Codec(const CodecConfig& config) : config_(config) {
  config_.validate();
  plan_ = build_projection_plan(config_.projection_seed, config_.dim, config_.code_bits);
}

}  // namespace lookalike
