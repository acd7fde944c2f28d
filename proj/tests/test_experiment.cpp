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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "salientgrads/experiment.hpp"

using namespace salientgrads;

namespace {

ExperimentConfig small(const std::string& out) {
  auto cfg = parse_config(
      "arch = 8,16,3\n"
      "clients = 3\n"
      "batch_size = 16\n"
      "epochs = 3\n"
      "saliency_batches = 2\n"
      "synthetic_samples = 600\n"
      "synthetic_dims = 8\n"
      "synthetic_classes = 3\n"
      "seed = 4\n");
  cfg.out = out;
  return cfg;
}

std::vector<std::string> lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Drops the trailing comm_seconds column.
std::string without_timing(const std::string& row) {
  return row.substr(0, row.rfind(','));
}

}  // namespace

TEST_CASE("csv rows") {
  fed::RoundMetrics m;
  m.round = 3;
  m.epoch = 1;
  m.lr = 0.1;
  m.train_loss = 0.5;
  m.bytes_up = 10;
  m.bytes_down = 20;
  m.comm_seconds = 0.25;
  CHECK(csv_row(m) == "3,1,0.1,0.5,,10,20,0.250000000");
  m.mean_test_acc = 0.75;
  CHECK(csv_row(m).find(",0.75,") != std::string::npos);
}

TEST_CASE("same seed on the memory transport gives the same CSV") {
  const auto dir = std::filesystem::temp_directory_path();
  const std::string a = (dir / "sg_exp_a.csv").string();
  const std::string b = (dir / "sg_exp_b.csv").string();
  run_experiment(small(a));
  run_experiment(small(b));
  const auto la = lines(a);
  const auto lb = lines(b);
  REQUIRE(la.size() == lb.size());
  CHECK(la.front() == kCsvHeader);
  for (std::size_t i = 1; i < la.size(); ++i) CHECK(without_timing(la[i]) == without_timing(lb[i]));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("byte columns reconcile with transport counters") {
  const auto result = run_experiment(small(""));
  REQUIRE(result.runs.size() == 1);
  const RunSummary& r = result.runs.front();
  std::uint64_t up = 0, down = 0;
  for (const auto& m : r.rounds) {
    up += m.bytes_up;
    down += m.bytes_down;
  }
  CHECK(up == r.training_bytes.up);
  CHECK(down == r.training_bytes.down);
  CHECK(r.session_bytes.up > r.training_bytes.up);
  CHECK(r.rounds.size() == 3 * ((600 / 3 - 30 - 26) / 16));
}

TEST_CASE("paired comparison writes both CSVs and reports ratios") {
  const auto dir = std::filesystem::temp_directory_path();
  const std::string out = (dir / "sg_exp_cmp.csv").string();
  auto cfg = small(out);
  cfg.compare = true;
  const auto result = run_experiment(cfg);
  REQUIRE(result.runs.size() == 2);
  REQUIRE(result.find(fed::Protocol::kSalient) != nullptr);
  REQUIRE(result.find(fed::Protocol::kFedAvg) != nullptr);
  REQUIRE(result.bytes_ratio.has_value());
  REQUIRE(result.comm_speedup.has_value());
  CHECK(*result.bytes_ratio < 1.0);
  const std::string stem = (dir / "sg_exp_cmp").string();
  CHECK(std::filesystem::exists(stem + ".salient.csv"));
  CHECK(std::filesystem::exists(stem + ".fedavg.csv"));

  std::ostringstream summary;
  print_summary(summary, cfg, result);
  CHECK(summary.str().find("speedup") != std::string::npos);
  std::filesystem::remove(stem + ".salient.csv");
  std::filesystem::remove(stem + ".fedavg.csv");
}

TEST_CASE("class count mismatch is a config error") {
  auto cfg = small("");
  cfg.set("synthetic_classes", "5");
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}
