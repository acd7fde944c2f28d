// Copyright 2026 The SalientGrads Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "salientgrads/errors.hpp"

namespace salientgrads::wire {

using Bytes = std::vector<std::uint8_t>;

/// Appends little-endian primitives to a byte buffer.
class Writer {
 public:
  explicit Writer(std::size_t reserve = 0) { buffer_.reserve(reserve); }

  void magic(std::string_view tag) {
    for (char c : tag) buffer_.push_back(static_cast<std::uint8_t>(c));
  }

  void u32(std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
      buffer_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
  }

  void u64(std::uint64_t v) {
    for (int shift = 0; shift < 64; shift += 8) {
      buffer_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
  }

  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  Bytes take() && { return std::move(buffer_); }
  std::size_t size() const { return buffer_.size(); }

 private:
  Bytes buffer_;
};

/// Bounds-checked little-endian reader. Every overrun raises FormatError.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  void expect_magic(std::string_view tag) {
    need(tag.size());
    for (std::size_t i = 0; i < tag.size(); ++i) {
      if (data_[pos_ + i] != static_cast<std::uint8_t>(tag[i])) {
        throw FormatError("bad magic: expected " + std::string(tag));
      }
    }
    pos_ += tag.size();
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  std::size_t remaining() const { return data_.size() - pos_; }

  void expect_end() const {
    if (remaining() != 0) throw FormatError("trailing bytes in payload");
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("truncated payload");
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

/// FNV-1a, 64-bit.
inline std::uint64_t fnv1a(std::span<const std::uint8_t> data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace salientgrads::wire
