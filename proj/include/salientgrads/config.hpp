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
#include <string>
#include <string_view>

#include "salientgrads/dataset.hpp"
#include "salientgrads/protocol.hpp"
#include "salientgrads/sparse_codec.hpp"
#include "salientgrads/transport.hpp"

namespace salientgrads {

/// Every knob of one experiment. Loaded from a flat `key = value` file
/// (`#` starts a comment) and overridable key by key.
struct ExperimentConfig {
  std::string arch = "20,64,64,4";
  std::string conv;
  std::size_t clients = 5;
  double sparsity = 0.9;
  std::size_t saliency_batches = 10;
  std::size_t batch_size = 128;
  std::size_t epochs = 20;
  double lr = 0.1;
  std::uint64_t seed = 0;
  fed::Protocol protocol = fed::Protocol::kSalient;
  TransportKind transport = TransportKind::kMemory;
  WireMode wire = WireMode::kFull;
  bool compare = false;
  data::DataSource dataset;
  std::string out;

  /// Throws ConfigError on unknown keys or malformed values.
  void set(std::string_view key, std::string_view value);
  void validate() const;

  nn::Architecture architecture() const;
  fed::SessionConfig session_config() const;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config_file(const std::string& path);

}  // namespace salientgrads
