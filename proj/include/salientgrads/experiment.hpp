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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "salientgrads/config.hpp"
#include "salientgrads/protocol.hpp"

namespace salientgrads {

inline constexpr const char* kCsvHeader =
    "round,epoch,lr,train_loss,mean_test_acc,bytes_up,bytes_down,comm_seconds";

/// One CSV row; comm_seconds is the only wall-clock column.
std::string csv_row(const fed::RoundMetrics& m);

struct RunSummary {
  fed::Protocol protocol = fed::Protocol::kSalient;
  std::size_t parameters = 0;
  std::size_t active_parameters = 0;
  double mask_density = 1.0;
  std::vector<fed::RoundMetrics> rounds;
  double final_mean_test_acc = 0.0;
  std::vector<double> final_client_test_acc;
  /// Whole-session transport counters (setup and mask phase included).
  TrafficTotals session_bytes;
  /// Counters accumulated from the first training round on.
  TrafficTotals training_bytes;
  double comm_mean = 0.0;
  double comm_std = 0.0;
  double gather_mean = 0.0;
  double gather_std = 0.0;
  std::string csv_path;
};

struct ExperimentResult {
  std::vector<RunSummary> runs;
  /// Paired comparison only: mean comm(fedavg) / mean comm(salient).
  std::optional<double> comm_speedup;
  std::optional<double> gather_speedup;
  /// Paired comparison only: per-round gradient bytes salient / fedavg.
  std::optional<double> bytes_ratio;

  const RunSummary* find(fed::Protocol p) const;
};

/// Setup, mask phase (salient only), then training; one run per protocol
/// (both when `compare` is set, sharing seed and data).
ExperimentResult run_experiment(const ExperimentConfig& config);

void print_summary(std::ostream& out, const ExperimentConfig& config,
                   const ExperimentResult& result);

}  // namespace salientgrads
