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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salientgrads/nn.hpp"

namespace salientgrads::data {

/// Row-major feature matrix with integer class labels.
struct Dataset {
  std::size_t dims = 0;
  std::size_t classes = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  nn::Batch gather(std::span<const std::size_t> rows) const;
  Dataset subset(std::span<const std::size_t> rows) const;
  nn::Batch all() const;
};

/// Isotropic Gaussian blobs: class centers have i.i.d. N(0, separation^2)
/// coordinates, samples add unit-variance noise. Labels cycle through the
/// classes so every class has n/classes (+1) samples.
struct SyntheticSpec {
  std::size_t samples = 1000;
  std::size_t dims = 20;
  std::size_t classes = 4;
  double separation = 3.0;
  std::uint64_t seed = 1;
};

struct DataSource {
  enum class Kind { kSynthetic, kIdx, kCsv };
  Kind kind = Kind::kSynthetic;
  SyntheticSpec synthetic;
  std::string idx_images;
  std::string idx_labels;
  std::string csv_path;
  /// Column name (requires a header row) or 0-based index; empty = last.
  std::string csv_label;
};

Dataset generate_blobs(const SyntheticSpec& spec);
/// IDX image + label files; pixels scaled by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
/// Numeric CSV with one integer label column; header row optional.
Dataset load_csv(const std::string& path, const std::string& label_column = {});

/// Synthetic and CSV features are standardized per feature.
Dataset load_or_generate_dataset(const DataSource& source);

/// Per-feature zero mean, unit variance (constant features are only centered).
void standardize(Dataset& data);

/// One client's shard: 15% held out for test, then 15% of the remainder for
/// validation; the rest trains.
struct DatasetSplit {
  std::size_t client = 0;
  Dataset train;
  Dataset val;
  Dataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  std::vector<std::size_t> test_rows;

  std::size_t shard_size() const {
    return train_rows.size() + val_rows.size() + test_rows.size();
  }
};

constexpr double kHoldoutFraction = 0.15;
constexpr std::size_t kMinShard = 4;

/// Random IID shards (sizes differ by at most one), disjoint, covering every
/// row of `data`.
std::vector<DatasetSplit> partition(const Dataset& data, std::size_t clients,
                                    std::uint64_t seed);

}  // namespace salientgrads::data
