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

// Shared generators and oracles for the unit and acceptance suites.

#include <cmath>
#include <cstring>
#include <vector>

#include "salientgrads/dataset.hpp"
#include "salientgrads/nn.hpp"
#include "salientgrads/protocol.hpp"
#include "salientgrads/rng.hpp"

namespace sg_test {

using salientgrads::Rng;
namespace nn = salientgrads::nn;
namespace data = salientgrads::data;
namespace fed = salientgrads::fed;

inline bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

inline nn::Batch random_batch(Rng& rng, std::size_t rows, std::size_t cols,
                              std::size_t classes) {
  nn::Batch b;
  b.rows = rows;
  b.cols = cols;
  b.inputs.resize(rows * cols);
  for (double& v : b.inputs) v = rng.normal();
  b.labels.resize(rows);
  for (int& l : b.labels) l = static_cast<int>(rng.below(classes));
  return b;
}

/// Small random MLP (optionally with a conv stem) under `max_params`.
inline nn::Architecture random_arch(Rng& rng, std::size_t max_params) {
  for (;;) {
    nn::Architecture arch;
    if (rng.below(4) == 0) {
      nn::ConvStem c;
      c.in_channels = 1 + rng.below(2);
      c.height = 3 + rng.below(2);
      c.width = 3 + rng.below(2);
      c.out_channels = 1 + rng.below(2);
      c.kernel = 2;
      arch.conv = c;
      arch.input_dim = c.input_size();
    } else {
      arch.input_dim = 1 + rng.below(5);
    }
    const std::size_t hidden = rng.below(3);
    for (std::size_t h = 0; h < hidden; ++h) {
      arch.layers.push_back({1 + rng.below(6),
                             rng.below(5) == 0 ? nn::Activation::kIdentity
                                               : nn::Activation::kRelu});
    }
    arch.layers.push_back({2 + rng.below(3), nn::Activation::kIdentity});
    if (nn::Manifest(arch).total_size() <= max_params) return arch;
  }
}

/// Central finite differences of forward_loss, coordinate by coordinate.
inline std::vector<double> finite_difference_grad(const nn::ParamVector& params,
                                                  const nn::Architecture& arch,
                                                  const nn::Batch& batch,
                                                  double eps) {
  std::vector<double> g(params.size());
  nn::ParamVector probe = params;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double saved = probe.values[j];
    probe.values[j] = saved + eps;
    const double up = nn::forward_loss(probe, arch, batch).loss;
    probe.values[j] = saved - eps;
    const double down = nn::forward_loss(probe, arch, batch).loss;
    probe.values[j] = saved;
    g[j] = (up - down) / (2.0 * eps);
  }
  return g;
}

/// Relative error with an absolute floor: |a - b| <= rel * max(|a|, |b|) or
/// |a - b| <= abs_floor.
inline bool close(double a, double b, double rel, double abs_floor) {
  const double diff = std::fabs(a - b);
  return diff <= abs_floor || diff <= rel * std::max(std::fabs(a), std::fabs(b));
}

/// Synthetic blob shards for `clients` clients.
inline std::vector<data::DatasetSplit> blob_splits(std::size_t clients,
                                                   std::size_t samples,
                                                   std::size_t dims,
                                                   std::size_t classes,
                                                   double separation,
                                                   std::uint64_t seed) {
  data::DataSource src;
  src.synthetic = {samples, dims, classes, separation, seed};
  data::Dataset d = data::load_or_generate_dataset(src);
  return data::partition(d, clients, seed);
}

}  // namespace sg_test
