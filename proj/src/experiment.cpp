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

#include "salientgrads/experiment.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include "salientgrads/errors.hpp"

namespace salientgrads {
namespace {

std::pair<double, double> mean_std(const std::vector<fed::RoundMetrics>& rounds,
                                   double fed::RoundMetrics::*field) {
  if (rounds.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (const auto& r : rounds) sum += r.*field;
  const double mean = sum / static_cast<double>(rounds.size());
  double sq = 0.0;
  for (const auto& r : rounds) sq += (r.*field - mean) * (r.*field - mean);
  return {mean, std::sqrt(sq / static_cast<double>(rounds.size()))};
}

std::string csv_path_for(const ExperimentConfig& cfg, fed::Protocol p) {
  if (cfg.out.empty()) return {};
  if (!cfg.compare) return cfg.out;
  std::string stem = cfg.out;
  if (stem.size() > 4 && stem.ends_with(".csv")) stem.resize(stem.size() - 4);
  return fmt::format("{}.{}.csv", stem, fed::to_string(p));
}

RunSummary run_protocol(const ExperimentConfig& cfg, fed::Protocol protocol,
                        const std::vector<data::DatasetSplit>& splits) {
  RunSummary summary;
  summary.protocol = protocol;
  summary.csv_path = csv_path_for(cfg, protocol);

  std::unique_ptr<std::ofstream> csv;
  if (!summary.csv_path.empty()) {
    csv = std::make_unique<std::ofstream>(summary.csv_path);
    if (!*csv) throw ConfigError(fmt::format("cannot write '{}'", summary.csv_path));
    *csv << kCsvHeader << '\n' << std::flush;
  }

  auto transport = make_transport(cfg.transport, cfg.clients);
  fed::Session session = fed::setup_session(cfg.session_config(), splits, *transport);
  summary.parameters = session.server.params.size();
  summary.active_parameters = summary.parameters;
  if (protocol == fed::Protocol::kSalient) {
    const GlobalMask& mask = fed::mask_phase(session);
    summary.active_parameters = mask.count();
    summary.mask_density = mask.density;
  }

  summary.rounds = fed::run_training(
      session, cfg.epochs, cfg.lr, protocol, [&](const fed::RoundMetrics& m) {
        if (csv) *csv << csv_row(m) << '\n' << std::flush;
      });

  if (!summary.rounds.empty()) {
    summary.final_mean_test_acc = summary.rounds.back().mean_test_acc.value_or(0.0);
    summary.final_client_test_acc = summary.rounds.back().client_test_acc;
  } else {
    summary.final_client_test_acc = fed::evaluate_clients(session);
    double sum = 0.0;
    for (double a : summary.final_client_test_acc) sum += a;
    summary.final_mean_test_acc =
        sum / static_cast<double>(summary.final_client_test_acc.size());
  }
  summary.session_bytes = transport->totals();
  const TrafficTotals start =
      session.training_log_start ? session.training_start_totals : summary.session_bytes;
  summary.training_bytes = {summary.session_bytes.up - start.up,
                            summary.session_bytes.down - start.down};
  std::tie(summary.comm_mean, summary.comm_std) =
      mean_std(summary.rounds, &fed::RoundMetrics::comm_seconds);
  std::tie(summary.gather_mean, summary.gather_std) =
      mean_std(summary.rounds, &fed::RoundMetrics::gather_seconds);
  return summary;
}

}  // namespace

std::string csv_row(const fed::RoundMetrics& m) {
  return fmt::format("{},{},{:g},{},{},{},{},{:.9f}", m.round, m.epoch, m.lr,
                     m.train_loss,
                     m.mean_test_acc ? fmt::format("{}", *m.mean_test_acc) : "",
                     m.bytes_up, m.bytes_down, m.comm_seconds);
}

const RunSummary* ExperimentResult::find(fed::Protocol p) const {
  for (const RunSummary& r : runs) {
    if (r.protocol == p) return &r;
  }
  return nullptr;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const nn::Architecture arch = config.architecture();
  data::Dataset dataset = data::load_or_generate_dataset(config.dataset);
  if (dataset.dims != arch.input_dim) {
    throw ConfigError(fmt::format("dataset has {} features, architecture expects {}",
                                  dataset.dims, arch.input_dim));
  }
  if (dataset.classes > arch.classes()) {
    throw ConfigError(fmt::format("dataset has {} classes, architecture outputs {}",
                                  dataset.classes, arch.classes()));
  }
  spdlog::info("dataset {}: {} samples, {} features, {} classes", dataset.provenance,
               dataset.size(), dataset.dims, dataset.classes);
  const auto splits = data::partition(dataset, config.clients, config.seed);

  ExperimentResult result;
  if (config.compare) {
    result.runs.push_back(run_protocol(config, fed::Protocol::kSalient, splits));
    result.runs.push_back(run_protocol(config, fed::Protocol::kFedAvg, splits));
    const RunSummary& s = result.runs[0];
    const RunSummary& f = result.runs[1];
    if (s.comm_mean > 0.0) result.comm_speedup = f.comm_mean / s.comm_mean;
    if (s.gather_mean > 0.0) result.gather_speedup = f.gather_mean / s.gather_mean;
    if (!s.rounds.empty() && !f.rounds.empty()) {
      const auto& sr = s.rounds.back();
      const auto& fr = f.rounds.back();
      result.bytes_ratio = static_cast<double>(sr.bytes_up + sr.bytes_down) /
                           static_cast<double>(fr.bytes_up + fr.bytes_down);
    }
  } else {
    result.runs.push_back(run_protocol(config, config.protocol, splits));
  }
  return result;
}

void print_summary(std::ostream& out, const ExperimentConfig& config,
                   const ExperimentResult& result) {
  fmt::print(out, "== summary ==\n");
  fmt::print(out, "architecture      {}\n", config.architecture().describe());
  fmt::print(out, "clients           {}\n", config.clients);
  for (const RunSummary& r : result.runs) {
    fmt::print(out, "-- {} --\n", fed::to_string(r.protocol));
    fmt::print(out, "parameters        {} ({} active, maskable density {:.4f})\n",
               r.parameters, r.active_parameters, r.mask_density);
    fmt::print(out, "rounds            {}\n", r.rounds.size());
    fmt::print(out, "final_test_acc    {:.4f}\n", r.final_mean_test_acc);
    fmt::print(out, "bytes_up          {} (training {})\n", r.session_bytes.up,
               r.training_bytes.up);
    fmt::print(out, "bytes_down        {} (training {})\n", r.session_bytes.down,
               r.training_bytes.down);
    fmt::print(out, "comm_seconds      {:.6f} +- {:.6f}\n", r.comm_mean, r.comm_std);
    fmt::print(out, "gather_seconds    {:.6f} +- {:.6f}\n", r.gather_mean, r.gather_std);
    if (!r.csv_path.empty()) fmt::print(out, "csv               {}\n", r.csv_path);
  }
  if (result.comm_speedup) {
    fmt::print(out, "-- comparison --\n");
    fmt::print(out, "speedup_comm      {:.3f}\n", *result.comm_speedup);
  }
  if (result.gather_speedup) {
    fmt::print(out, "speedup_gather    {:.3f}\n", *result.gather_speedup);
  }
  if (result.bytes_ratio) {
    fmt::print(out, "bytes_ratio       {:.4f}\n", *result.bytes_ratio);
  }
}

}  // namespace salientgrads
