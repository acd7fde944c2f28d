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

#include "salientgrads/nn.hpp"
#include "salientgrads/saliency.hpp"
#include "salientgrads/wire.hpp"

namespace salientgrads {

/// Fixed set of trainable coordinates. Non-maskable coordinates (biases) are
/// always active; `density` is measured over the maskable set only.
struct GlobalMask {
  std::vector<std::uint8_t> bits;
  std::vector<std::uint32_t> active_indices;
  double density = 1.0;
  std::size_t maskable_total = 0;
  std::size_t maskable_active = 0;

  std::size_t size() const { return bits.size(); }
  std::size_t count() const { return active_indices.size(); }
  /// Active fraction of the whole parameter vector.
  double model_density() const {
    return bits.empty() ? 1.0
                        : static_cast<double>(count()) /
                              static_cast<double>(bits.size());
  }

  static GlobalMask all_ones(const nn::Manifest& manifest);
  /// Rebuilds a mask from its active index list; throws FormatError if the
  /// list is unsorted, out of range, or drops a non-maskable index.
  static GlobalMask from_indices(std::vector<std::uint32_t> indices,
                                 const nn::Manifest& manifest);
};

/// Elementwise sum in the given (ascending client-id) order.
SaliencyScores aggregate_scores(std::span<const SaliencyScores> all_scores);

/// Number of maskable coordinates kept at the given sparsity.
std::size_t kept_count(std::size_t maskable, double sparsity);

/// Keeps the k highest-scoring maskable coordinates, ordered by
/// (score desc, index asc), where k = round((1 - sparsity) * |maskable|).
GlobalMask topk_mask(const SaliencyScores& scores, const nn::Manifest& manifest,
                     double sparsity);

nn::GradVector mask_grad(const nn::GradVector& grad, const GlobalMask& mask);

/// "SGMK" | u32 d | u32 count | count x u32 index.
wire::Bytes serialize_mask(const GlobalMask& mask);
GlobalMask parse_mask(std::span<const std::uint8_t> payload,
                      const nn::Manifest& manifest);
constexpr std::size_t mask_payload_bytes(std::size_t count) {
  return 12 + 4 * count;
}

}  // namespace salientgrads
