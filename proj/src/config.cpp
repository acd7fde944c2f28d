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

#include "salientgrads/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "salientgrads/errors.hpp"

namespace salientgrads {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, value));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, value));
}

}  // namespace

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "arch") {
    arch = value;
  } else if (key == "conv") {
    conv = value;
  } else if (key == "clients") {
    clients = parse_number<std::size_t>(key, value);
  } else if (key == "sparsity") {
    sparsity = parse_number<double>(key, value);
  } else if (key == "saliency_batches") {
    saliency_batches = parse_number<std::size_t>(key, value);
  } else if (key == "batch_size") {
    batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "epochs") {
    epochs = parse_number<std::size_t>(key, value);
  } else if (key == "lr") {
    lr = parse_number<double>(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "protocol") {
    if (value == "salient") {
      protocol = fed::Protocol::kSalient;
    } else if (value == "fedavg") {
      protocol = fed::Protocol::kFedAvg;
    } else {
      throw ConfigError(fmt::format("protocol must be salient or fedavg, got '{}'", value));
    }
  } else if (key == "transport") {
    if (value == "memory") {
      transport = TransportKind::kMemory;
    } else if (value == "loopback") {
      transport = TransportKind::kLoopback;
    } else {
      throw ConfigError(fmt::format("transport must be memory or loopback, got '{}'", value));
    }
  } else if (key == "wire") {
    if (value == "full") {
      wire = WireMode::kFull;
    } else if (value == "values-only") {
      wire = WireMode::kValuesOnly;
    } else {
      throw ConfigError(fmt::format("wire must be full or values-only, got '{}'", value));
    }
  } else if (key == "compare") {
    compare = parse_bool(key, value);
  } else if (key == "out") {
    out = value;
  } else if (key == "dataset") {
    if (value == "synthetic") {
      dataset.kind = data::DataSource::Kind::kSynthetic;
    } else if (value == "idx") {
      dataset.kind = data::DataSource::Kind::kIdx;
    } else if (value == "csv") {
      dataset.kind = data::DataSource::Kind::kCsv;
    } else {
      throw ConfigError(fmt::format("dataset must be synthetic, idx or csv, got '{}'", value));
    }
  } else if (key == "synthetic_samples") {
    dataset.synthetic.samples = parse_number<std::size_t>(key, value);
  } else if (key == "synthetic_dims") {
    dataset.synthetic.dims = parse_number<std::size_t>(key, value);
  } else if (key == "synthetic_classes") {
    dataset.synthetic.classes = parse_number<std::size_t>(key, value);
  } else if (key == "synthetic_separation") {
    dataset.synthetic.separation = parse_number<double>(key, value);
  } else if (key == "synthetic_seed") {
    dataset.synthetic.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "idx_images") {
    dataset.idx_images = value;
  } else if (key == "idx_labels") {
    dataset.idx_labels = value;
  } else if (key == "csv_path") {
    dataset.csv_path = value;
  } else if (key == "csv_label") {
    dataset.csv_label = value;
  } else {
    throw ConfigError(fmt::format("unknown config key '{}'", key));
  }
}

void ExperimentConfig::validate() const {
  if (clients == 0) throw ConfigError("clients must be >= 1");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    throw ConfigError(fmt::format("sparsity {} outside [0, 1)", sparsity));
  }
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (saliency_batches == 0) throw ConfigError("saliency_batches must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
  if (dataset.kind == data::DataSource::Kind::kIdx &&
      (dataset.idx_images.empty() || dataset.idx_labels.empty())) {
    throw ConfigError("idx dataset needs idx_images and idx_labels");
  }
  if (dataset.kind == data::DataSource::Kind::kCsv && dataset.csv_path.empty()) {
    throw ConfigError("csv dataset needs csv_path");
  }
  architecture();
}

nn::Architecture ExperimentConfig::architecture() const {
  return nn::Architecture::parse(arch, conv);
}

fed::SessionConfig ExperimentConfig::session_config() const {
  return fed::SessionConfig{architecture(), sparsity, saliency_batches,
                            batch_size, seed, wire};
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? text.npos : end - start);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (!line.empty()) {
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(fmt::format("line {}: expected key = value", line_no));
      }
      cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config '{}'", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace salientgrads
