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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "salientgrads/masking.hpp"
#include "salientgrads/nn.hpp"
#include "salientgrads/wire.hpp"

namespace salientgrads {

/// Coordinate-form sparse gradient. A flat parameter vector has a single
/// row, so CSR degenerates to (index, value) pairs.
///
/// Wire layout, little-endian:
///   "SGGR" | u32 dense_len | u32 nnz | nnz x (u32 index, f32 value)
///
/// The values-only variant drops the index list once both ends know the mask:
///   "SGGV" | u32 dense_len | u32 nnz | nnz x f32 value
struct SparseGrad {
  std::vector<std::uint32_t> indices;
  std::vector<float> values;
  std::size_t dense_len = 0;

  std::size_t nnz() const { return indices.size(); }
  std::size_t payload_bytes() const { return sparse_payload_bytes(nnz()); }

  static constexpr std::size_t sparse_payload_bytes(std::size_t nnz) {
    return 12 + 8 * nnz;
  }
};

enum class WireMode { kFull, kValuesOnly };

constexpr std::size_t values_only_payload_bytes(std::size_t nnz) {
  return 12 + 4 * nnz;
}

/// "SGDN" | u32 d | d x f32. Used for dense gradients and parameter broadcasts.
constexpr std::size_t dense_payload_bytes(std::size_t d) { return 8 + 4 * d; }

/// One entry per active mask index, explicit zeros included.
SparseGrad encode(const nn::GradVector& grad, const GlobalMask& mask);

/// Dense vector with the entries at their indices and zeros elsewhere.
nn::GradVector decode(const SparseGrad& sg);

wire::Bytes serialize(const SparseGrad& sg);
/// Validates the header, index ordering, and bounds.
SparseGrad parse_sparse(std::span<const std::uint8_t> payload);

wire::Bytes serialize_values_only(const SparseGrad& sg);
/// Re-attaches the mask's active index list to a values-only payload.
SparseGrad parse_values_only(std::span<const std::uint8_t> payload,
                             const GlobalMask& mask);

wire::Bytes serialize_dense(std::span<const double> values);
std::vector<double> parse_dense(std::span<const std::uint8_t> payload);

/// Rounds every entry to the 32-bit wire precision.
nn::GradVector to_wire_precision(const nn::GradVector& grad);

}  // namespace salientgrads
