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

// Experiment driver.
//
//   salientgrads run --config exp.conf [--protocol salient|fedavg] [--compare] ...
//
// Exit codes: 0 success, 1 configuration error, 2 runtime abort.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "salientgrads/config.hpp"
#include "salientgrads/errors.hpp"
#include "salientgrads/experiment.hpp"
#include "salientgrads/logging.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct RunFlags {
  std::string config_path;
  std::optional<std::string> protocol;
  std::optional<std::string> sparsity;
  std::optional<std::string> clients;
  std::optional<std::string> epochs;
  std::optional<std::string> batch_size;
  std::optional<std::string> lr;
  std::optional<std::string> seed;
  std::optional<std::string> transport;
  std::optional<std::string> wire;
  std::optional<std::string> out;
  bool compare = false;
};

salientgrads::ExperimentConfig build_config(const RunFlags& f) {
  salientgrads::ExperimentConfig cfg = salientgrads::load_config_file(f.config_path);
  auto apply = [&cfg](const char* key, const std::optional<std::string>& v) {
    if (v) cfg.set(key, *v);
  };
  apply("protocol", f.protocol);
  apply("sparsity", f.sparsity);
  apply("clients", f.clients);
  apply("epochs", f.epochs);
  apply("batch_size", f.batch_size);
  apply("lr", f.lr);
  apply("seed", f.seed);
  apply("transport", f.transport);
  apply("wire", f.wire);
  apply("out", f.out);
  if (f.compare) cfg.compare = true;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated sparse training with saliency masks at initialization"};
  app.require_subcommand(1);
  RunFlags flags;
  CLI::App* run = app.add_subcommand("run", "Run one experiment (or a paired comparison)");
  run->add_option("--config", flags.config_path, "key = value config file")->required();
  run->add_option("--protocol", flags.protocol, "salient | fedavg");
  run->add_option("--sparsity", flags.sparsity, "Fraction of maskable weights pruned");
  run->add_option("--clients", flags.clients, "Number of clients");
  run->add_option("--epochs", flags.epochs, "Training epochs");
  run->add_option("--batch-size", flags.batch_size, "Minibatch size");
  run->add_option("--lr", flags.lr, "Base learning rate");
  run->add_option("--seed", flags.seed, "Experiment seed");
  run->add_option("--transport", flags.transport, "memory | loopback");
  run->add_option("--wire", flags.wire, "full | values-only");
  run->add_flag("--compare", flags.compare, "Run both protocols with the same seed");
  run->add_option("--out", flags.out, "Per-round metrics CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  salientgrads::ExperimentConfig cfg;
  try {
    salientgrads::configure_logging();
    cfg = build_config(flags);
  } catch (const salientgrads::Error& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  }

  try {
    const salientgrads::ExperimentResult result = salientgrads::run_experiment(cfg);
    salientgrads::print_summary(std::cout, cfg, result);
    if (!cfg.out.empty()) {
      std::ofstream summary(cfg.out + ".summary.txt");
      salientgrads::print_summary(summary, cfg, result);
    }
  } catch (const salientgrads::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "aborted: {}\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
