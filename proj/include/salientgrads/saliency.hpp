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
#include <span>
#include <vector>

#include "salientgrads/nn.hpp"
#include "salientgrads/wire.hpp"

namespace salientgrads {

/// Per-parameter connection sensitivity at initialization, |theta * dL/dtheta|,
/// averaged over the minibatches that produced it.
struct SaliencyScores {
  std::vector<double> scores;
  std::size_t batches_used = 0;

  std::size_t size() const { return scores.size(); }
};

/// |theta_j * g_j| for every maskable j; zero at non-maskable positions.
std::vector<double> connection_saliency(const nn::ParamVector& params,
                                        std::span<const double> grad);

/// Mean of connection_saliency over the given batches, summed in order.
SaliencyScores compute_saliency(const nn::ParamVector& params,
                                const nn::Architecture& arch,
                                std::span<const nn::Batch> batches);

/// "SGSC" | u32 d | u32 batches_used | d x f32.
wire::Bytes serialize_scores(const SaliencyScores& scores);
SaliencyScores parse_scores(std::span<const std::uint8_t> payload);
constexpr std::size_t scores_payload_bytes(std::size_t d) { return 12 + 4 * d; }

}  // namespace salientgrads
