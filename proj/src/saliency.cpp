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

#include "salientgrads/saliency.hpp"

#include <cmath>

#include <fmt/format.h>

#include "salientgrads/errors.hpp"

namespace salientgrads {

std::vector<double> connection_saliency(const nn::ParamVector& params,
                                        std::span<const double> grad) {
  if (grad.size() != params.size()) {
    throw DimensionError(fmt::format("gradient length {} != parameter length {}",
                                     grad.size(), params.size()));
  }
  const auto& maskable = params.manifest.maskable_flags();
  std::vector<double> s(params.size(), 0.0);
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (maskable[j]) s[j] = std::fabs(params.values[j] * grad[j]);
  }
  return s;
}

SaliencyScores compute_saliency(const nn::ParamVector& params,
                                const nn::Architecture& arch,
                                std::span<const nn::Batch> batches) {
  if (batches.empty()) {
    throw ConfigError("saliency needs at least one minibatch");
  }
  SaliencyScores out{std::vector<double>(params.size(), 0.0), batches.size()};
  for (const nn::Batch& batch : batches) {
    const nn::GradVector g = nn::backward(params, arch, batch);
    const std::vector<double> s = connection_saliency(params, g.values);
    for (std::size_t j = 0; j < s.size(); ++j) out.scores[j] += s[j];
  }
  const double count = static_cast<double>(batches.size());
  for (double& v : out.scores) v /= count;
  return out;
}

wire::Bytes serialize_scores(const SaliencyScores& scores) {
  wire::Writer w(scores_payload_bytes(scores.size()));
  w.magic("SGSC");
  w.u32(static_cast<std::uint32_t>(scores.size()));
  w.u32(static_cast<std::uint32_t>(scores.batches_used));
  for (double v : scores.scores) w.f32(static_cast<float>(v));
  return std::move(w).take();
}

SaliencyScores parse_scores(std::span<const std::uint8_t> payload) {
  wire::Reader r(payload);
  r.expect_magic("SGSC");
  const std::uint32_t d = r.u32();
  SaliencyScores out;
  out.batches_used = r.u32();
  if (r.remaining() != 4ULL * d) throw FormatError("score payload length mismatch");
  out.scores.resize(d);
  for (double& v : out.scores) {
    v = r.f32();
    if (!std::isfinite(v) || v < 0.0) {
      throw FormatError("saliency scores must be finite and non-negative");
    }
  }
  if (out.batches_used == 0) throw FormatError("scores report zero batches");
  return out;
}

}  // namespace salientgrads
