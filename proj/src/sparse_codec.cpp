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

#include "salientgrads/sparse_codec.hpp"

#include <fmt/format.h>

#include "salientgrads/errors.hpp"

namespace salientgrads {

SparseGrad encode(const nn::GradVector& grad, const GlobalMask& mask) {
  if (grad.size() != mask.size()) {
    throw DimensionError(fmt::format("gradient length {} != mask length {}",
                                     grad.size(), mask.size()));
  }
  SparseGrad sg;
  sg.dense_len = grad.size();
  sg.indices = mask.active_indices;
  sg.values.reserve(sg.indices.size());
  for (std::uint32_t i : sg.indices) {
    sg.values.push_back(static_cast<float>(grad.values[i]));
  }
  return sg;
}

nn::GradVector decode(const SparseGrad& sg) {
  if (sg.indices.size() != sg.values.size()) {
    throw FormatError("sparse gradient index/value count mismatch");
  }
  nn::GradVector out{std::vector<double>(sg.dense_len, 0.0)};
  for (std::size_t k = 0; k < sg.indices.size(); ++k) {
    if (sg.indices[k] >= sg.dense_len) {
      throw FormatError(fmt::format("index {} >= dense length {}",
                                    sg.indices[k], sg.dense_len));
    }
    out.values[sg.indices[k]] = sg.values[k];
  }
  return out;
}

wire::Bytes serialize(const SparseGrad& sg) {
  wire::Writer w(sg.payload_bytes());
  w.magic("SGGR");
  w.u32(static_cast<std::uint32_t>(sg.dense_len));
  w.u32(static_cast<std::uint32_t>(sg.nnz()));
  for (std::size_t k = 0; k < sg.nnz(); ++k) {
    w.u32(sg.indices[k]);
    w.f32(sg.values[k]);
  }
  return std::move(w).take();
}

SparseGrad parse_sparse(std::span<const std::uint8_t> payload) {
  wire::Reader r(payload);
  r.expect_magic("SGGR");
  SparseGrad sg;
  sg.dense_len = r.u32();
  const std::uint32_t nnz = r.u32();
  if (nnz > sg.dense_len) throw FormatError("nnz exceeds dense length");
  if (r.remaining() < 8ULL * nnz) throw FormatError("truncated sparse gradient");
  sg.indices.resize(nnz);
  sg.values.resize(nnz);
  for (std::uint32_t k = 0; k < nnz; ++k) {
    sg.indices[k] = r.u32();
    sg.values[k] = r.f32();
    if (sg.indices[k] >= sg.dense_len) {
      throw FormatError(fmt::format("index {} >= dense length {}",
                                    sg.indices[k], sg.dense_len));
    }
    if (k > 0 && sg.indices[k] <= sg.indices[k - 1]) {
      throw FormatError("sparse indices must be strictly increasing");
    }
  }
  r.expect_end();
  return sg;
}

wire::Bytes serialize_values_only(const SparseGrad& sg) {
  wire::Writer w(values_only_payload_bytes(sg.nnz()));
  w.magic("SGGV");
  w.u32(static_cast<std::uint32_t>(sg.dense_len));
  w.u32(static_cast<std::uint32_t>(sg.nnz()));
  for (float v : sg.values) w.f32(v);
  return std::move(w).take();
}

SparseGrad parse_values_only(std::span<const std::uint8_t> payload,
                             const GlobalMask& mask) {
  wire::Reader r(payload);
  r.expect_magic("SGGV");
  SparseGrad sg;
  sg.dense_len = r.u32();
  const std::uint32_t nnz = r.u32();
  if (sg.dense_len != mask.size() || nnz != mask.count()) {
    throw FormatError("values-only gradient does not match the session mask");
  }
  if (r.remaining() != 4ULL * nnz) throw FormatError("values-only length mismatch");
  sg.indices = mask.active_indices;
  sg.values.resize(nnz);
  for (float& v : sg.values) v = r.f32();
  return sg;
}

wire::Bytes serialize_dense(std::span<const double> values) {
  wire::Writer w(dense_payload_bytes(values.size()));
  w.magic("SGDN");
  w.u32(static_cast<std::uint32_t>(values.size()));
  for (double v : values) w.f32(static_cast<float>(v));
  return std::move(w).take();
}

std::vector<double> parse_dense(std::span<const std::uint8_t> payload) {
  wire::Reader r(payload);
  r.expect_magic("SGDN");
  const std::uint32_t d = r.u32();
  if (r.remaining() != 4ULL * d) throw FormatError("dense payload length mismatch");
  std::vector<double> out(d);
  for (double& v : out) v = r.f32();
  return out;
}

nn::GradVector to_wire_precision(const nn::GradVector& grad) {
  nn::GradVector out = grad;
  for (double& v : out.values) v = static_cast<float>(v);
  return out;
}

}  // namespace salientgrads
