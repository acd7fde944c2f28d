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

#include "salientgrads/config.hpp"
#include "salientgrads/errors.hpp"

using namespace salientgrads;

TEST_CASE("defaults") {
  const ExperimentConfig cfg;
  CHECK(cfg.clients == 5);
  CHECK(cfg.sparsity == 0.9);
  CHECK(cfg.protocol == fed::Protocol::kSalient);
  CHECK(cfg.transport == TransportKind::kMemory);
  CHECK_NOTHROW(cfg.validate());
  CHECK(nn::Manifest(cfg.architecture()).total_size() ==
        20 * 64 + 64 + 64 * 64 + 64 + 64 * 4 + 4);
}

TEST_CASE("parse key = value text") {
  const auto cfg = parse_config(
      "# experiment\n"
      "arch = 10, 32, 3\n"
      "clients=3   # trailing comment\n"
      "\n"
      "sparsity = 0.5\n"
      "protocol = fedavg\n"
      "transport = loopback\n"
      "wire = values-only\n"
      "compare = true\n"
      "synthetic_separation = 2.5\n"
      "seed = 42\n");
  CHECK(cfg.arch == "10, 32, 3");
  CHECK(cfg.clients == 3);
  CHECK(cfg.sparsity == 0.5);
  CHECK(cfg.protocol == fed::Protocol::kFedAvg);
  CHECK(cfg.transport == TransportKind::kLoopback);
  CHECK(cfg.wire == WireMode::kValuesOnly);
  CHECK(cfg.compare);
  CHECK(cfg.dataset.synthetic.separation == 2.5);
  CHECK(cfg.seed == 42);
  const auto sc = cfg.session_config();
  CHECK(sc.sparsity == 0.5);
  CHECK(sc.arch.classes() == 3);
}

TEST_CASE("set overrides a single key") {
  auto cfg = parse_config("epochs = 3\n");
  cfg.set("epochs", "7");
  CHECK(cfg.epochs == 7);
}

TEST_CASE("malformed configs") {
  CHECK_THROWS_AS(parse_config("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("clients\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("clients = three\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("protocol = gossip\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("compare = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("sparsity = 1.0\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("lr = 0\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("clients = 0\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("arch = 4\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("dataset = idx\n").validate(), ConfigError);
  CHECK_THROWS_AS(load_config_file("/nonexistent/sg.conf"), ConfigError);
}

TEST_CASE("load from file") {
  const auto path = std::filesystem::temp_directory_path() / "sg_config_test.conf";
  std::ofstream(path) << "clients = 2\nbatch_size = 16\n";
  const auto cfg = load_config_file(path.string());
  CHECK(cfg.clients == 2);
  CHECK(cfg.batch_size == 16);
  std::filesystem::remove(path);
}
