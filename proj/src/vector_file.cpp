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

#include "lookalike/vector_file.hpp"

#include <array>
#include <cstring>

#include "lookalike/error.hpp"

namespace lookalike {
namespace {

template <typename T>
T decode_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(p[k]) << (8 * k);
  return v;
}

template <typename T>
void encode_le(std::ofstream& out, T v) {
  std::array<char, sizeof(T)> buf;
  for (std::size_t k = 0; k < sizeof(T); ++k) buf[k] = static_cast<char>((v >> (8 * k)) & 0xFF);
  out.write(buf.data(), buf.size());
}

}  // namespace

SirvReader::SirvReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw Error(ErrorCode::kIo, "cannot open vector file " + path.string());
  char magic[4];
  read_exact(magic, 4, "magic");
  if (std::memcmp(magic, "SIRV", 4) != 0) {
    throw Error(ErrorCode::kIntegrity, path_.string() + ": bad magic at offset 0");
  }
  unsigned char header[16];
  read_exact(reinterpret_cast<char*>(header), sizeof(header), "header");
  const auto version = decode_le<std::uint32_t>(header);
  if (version != kSirvVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                path_.string() + ": unsupported SIRV version " + std::to_string(version));
  }
  dim_ = decode_le<std::uint32_t>(header + 4);
  count_ = decode_le<std::uint64_t>(header + 8);
  if (dim_ == 0 && count_ > 0) {
    throw Error(ErrorCode::kIntegrity, path_.string() + ": zero dimension with records at offset 8");
  }
}

void SirvReader::read_exact(char* dst, std::size_t n, const char* what) {
  in_.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw Error(ErrorCode::kIntegrity, path_.string() + ": truncated " + what + " at offset " +
                                           std::to_string(offset_ + in_.gcount()) + " (record " +
                                           std::to_string(read_) + ")");
  }
  offset_ += n;
}

std::optional<VectorRecord> SirvReader::next() {
  if (read_ >= count_) return std::nullopt;
  unsigned char len_buf[2];
  read_exact(reinterpret_cast<char*>(len_buf), 2, "id length");
  const auto id_len = decode_le<std::uint16_t>(len_buf);
  VectorRecord rec;
  rec.id.resize(id_len);
  read_exact(rec.id.data(), id_len, "id");
  std::vector<unsigned char> raw(static_cast<std::size_t>(dim_) * 4);
  read_exact(reinterpret_cast<char*>(raw.data()), raw.size(), "vector");
  rec.values.resize(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    const auto bits = decode_le<std::uint32_t>(raw.data() + 4 * i);
    std::memcpy(&rec.values[i], &bits, 4);
  }
  ++read_;
  return rec;
}

void SirvReader::skip(std::uint64_t n) {
  std::vector<char> scratch(static_cast<std::size_t>(dim_) * 4);
  for (std::uint64_t k = 0; k < n && read_ < count_; ++k) {
    unsigned char len_buf[2];
    read_exact(reinterpret_cast<char*>(len_buf), 2, "id length");
    std::string id(decode_le<std::uint16_t>(len_buf), '\0');
    read_exact(id.data(), id.size(), "id");
    read_exact(scratch.data(), scratch.size(), "vector");
    ++read_;
  }
}

SirvWriter::SirvWriter(const std::filesystem::path& path, std::uint32_t dim)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), dim_(dim) {
  if (!out_) throw Error(ErrorCode::kIo, "cannot create vector file " + path.string());
  out_.write("SIRV", 4);
  encode_le<std::uint32_t>(out_, kSirvVersion);
  encode_le<std::uint32_t>(out_, dim_);
  encode_le<std::uint64_t>(out_, 0);
}

SirvWriter::~SirvWriter() {
  try {
    close();
  } catch (...) {
  }
}

void SirvWriter::write(const std::string& id, const std::vector<float>& values) {
  if (values.size() != dim_) throw Error(ErrorCode::kShape, "vector dim does not match file dim");
  if (id.size() > 0xFFFF) throw Error(ErrorCode::kInvalidArgument, "id longer than 65535 bytes");
  encode_le<std::uint16_t>(out_, static_cast<std::uint16_t>(id.size()));
  out_.write(id.data(), static_cast<std::streamsize>(id.size()));
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    encode_le<std::uint32_t>(out_, bits);
  }
  ++count_;
}

void SirvWriter::close() {
  if (closed_) return;
  closed_ = true;
  out_.seekp(12);
  encode_le<std::uint64_t>(out_, count_);
  out_.close();
  if (!out_) throw Error(ErrorCode::kIo, "failed writing vector file " + path_.string());
}

VectorFile read_vector_file(const std::filesystem::path& path) {
  SirvReader reader(path);
  VectorFile file;
  file.dim = reader.dim();
  while (auto rec = reader.next()) file.records.push_back(std::move(*rec));
  return file;
}

void write_vector_file(const std::filesystem::path& path, std::uint32_t dim,
                       const std::vector<VectorRecord>& records) {
  SirvWriter writer(path, dim);
  for (const auto& rec : records) writer.write(rec.id, rec.values);
  writer.close();
}

}  // namespace lookalike
