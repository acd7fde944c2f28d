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

#include "salientgrads/masking.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "salientgrads/errors.hpp"

namespace salientgrads {
namespace {

void finish(GlobalMask& m, const nn::Manifest& manifest) {
  m.maskable_total = manifest.maskable_count();
  m.maskable_active = 0;
  for (std::uint32_t i : m.active_indices) {
    if (manifest.is_maskable(i)) ++m.maskable_active;
  }
  m.density = m.maskable_total == 0
                  ? 1.0
                  : static_cast<double>(m.maskable_active) /
                        static_cast<double>(m.maskable_total);
}

}  // namespace

GlobalMask GlobalMask::all_ones(const nn::Manifest& manifest) {
  GlobalMask m;
  m.bits.assign(manifest.total_size(), 1);
  m.active_indices.resize(manifest.total_size());
  for (std::size_t i = 0; i < m.active_indices.size(); ++i) {
    m.active_indices[i] = static_cast<std::uint32_t>(i);
  }
  finish(m, manifest);
  return m;
}

GlobalMask GlobalMask::from_indices(std::vector<std::uint32_t> indices,
                                    const nn::Manifest& manifest) {
  GlobalMask m;
  const std::size_t d = manifest.total_size();
  m.bits.assign(d, 0);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= d) throw FormatError("mask index out of range");
    if (k > 0 && indices[k] <= indices[k - 1]) {
      throw FormatError("mask indices must be strictly increasing");
    }
    m.bits[indices[k]] = 1;
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (!manifest.is_maskable(i) && !m.bits[i]) {
      throw FormatError(fmt::format("mask drops non-maskable index {}", i));
    }
  }
  m.active_indices = std::move(indices);
  finish(m, manifest);
  return m;
}

SaliencyScores aggregate_scores(std::span<const SaliencyScores> all_scores) {
  if (all_scores.empty()) throw ConfigError("no saliency scores to aggregate");
  SaliencyScores out{std::vector<double>(all_scores.front().size(), 0.0), 0};
  for (const SaliencyScores& s : all_scores) {
    if (s.size() != out.size()) {
      throw DimensionError(fmt::format("score length {} != {}", s.size(),
                                       out.size()));
    }
    for (std::size_t j = 0; j < s.size(); ++j) out.scores[j] += s.scores[j];
    out.batches_used += s.batches_used;
  }
  return out;
}

std::size_t kept_count(std::size_t maskable, double sparsity) {
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    throw ConfigError(fmt::format("sparsity {} outside [0, 1)", sparsity));
  }
  return static_cast<std::size_t>(
      std::llround((1.0 - sparsity) * static_cast<double>(maskable)));
}

GlobalMask topk_mask(const SaliencyScores& scores, const nn::Manifest& manifest,
                     double sparsity) {
  const std::size_t d = manifest.total_size();
  if (scores.size() != d) {
    throw DimensionError(fmt::format("score length {} != parameter length {}",
                                     scores.size(), d));
  }
  const std::size_t k = kept_count(manifest.maskable_count(), sparsity);
  if (k == 0) {
    throw ConfigError(fmt::format(
        "sparsity {} prunes every maskable parameter", sparsity));
  }

  std::vector<std::uint32_t> candidates;
  candidates.reserve(manifest.maskable_count());
  for (std::size_t i = 0; i < d; ++i) {
    if (manifest.is_maskable(i)) candidates.push_back(static_cast<std::uint32_t>(i));
  }
  const auto& s = scores.scores;
  auto ranks_before = [&s](std::uint32_t a, std::uint32_t b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return a < b;
  };
  if (k < candidates.size()) {
    std::nth_element(candidates.begin(), candidates.begin() + k,
                     candidates.end(), ranks_before);
    candidates.resize(k);
  }

  GlobalMask m;
  m.bits.assign(d, 0);
  for (std::uint32_t i : candidates) m.bits[i] = 1;
  for (std::size_t i = 0; i < d; ++i) {
    if (!manifest.is_maskable(i)) m.bits[i] = 1;
  }
  m.active_indices.reserve(k + (d - manifest.maskable_count()));
  for (std::size_t i = 0; i < d; ++i) {
    if (m.bits[i]) m.active_indices.push_back(static_cast<std::uint32_t>(i));
  }
  finish(m, manifest);
  return m;
}

nn::GradVector mask_grad(const nn::GradVector& grad, const GlobalMask& mask) {
  if (grad.size() != mask.size()) {
    throw DimensionError(fmt::format("gradient length {} != mask length {}",
                                     grad.size(), mask.size()));
  }
  nn::GradVector out{std::vector<double>(grad.size(), 0.0)};
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (mask.bits[i]) out.values[i] = grad.values[i];
  }
  return out;
}

wire::Bytes serialize_mask(const GlobalMask& mask) {
  wire::Writer w(mask_payload_bytes(mask.count()));
  w.magic("SGMK");
  w.u32(static_cast<std::uint32_t>(mask.size()));
  w.u32(static_cast<std::uint32_t>(mask.count()));
  for (std::uint32_t i : mask.active_indices) w.u32(i);
  return std::move(w).take();
}

GlobalMask parse_mask(std::span<const std::uint8_t> payload,
                      const nn::Manifest& manifest) {
  wire::Reader r(payload);
  r.expect_magic("SGMK");
  const std::uint32_t d = r.u32();
  const std::uint32_t count = r.u32();
  if (d != manifest.total_size()) {
    throw FormatError(fmt::format("mask for {} parameters, model has {}", d,
                                  manifest.total_size()));
  }
  if (r.remaining() != 4ULL * count) throw FormatError("mask payload length mismatch");
  std::vector<std::uint32_t> indices(count);
  for (std::uint32_t& i : indices) i = r.u32();
  return GlobalMask::from_indices(std::move(indices), manifest);
}

}  // namespace salientgrads
