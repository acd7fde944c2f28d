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

#include "salientgrads/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "salientgrads/errors.hpp"
#include "salientgrads/rng.hpp"
#include "salientgrads/wire.hpp"

namespace salientgrads::data {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open '{}'", path));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t big_endian_u32(std::span<const std::uint8_t> data,
                             std::size_t offset) {
  if (data.size() < offset + 4) throw FormatError("truncated IDX header");
  return (std::uint32_t{data[offset]} << 24) |
         (std::uint32_t{data[offset + 1]} << 16) |
         (std::uint32_t{data[offset + 2]} << 8) | std::uint32_t{data[offset + 3]};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> to_number(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::size_t infer_classes(const std::vector<int>& labels) {
  int top = -1;
  for (int l : labels) {
    if (l < 0) throw FormatError(fmt::format("negative label {}", l));
    top = std::max(top, l);
  }
  return static_cast<std::size_t>(top + 1);
}

}  // namespace

nn::Batch Dataset::gather(std::span<const std::size_t> rows) const {
  nn::Batch b;
  b.rows = rows.size();
  b.cols = dims;
  b.inputs.resize(rows.size() * dims);
  b.labels.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t r = rows[k];
    std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(r * dims), dims,
                b.inputs.begin() + static_cast<std::ptrdiff_t>(k * dims));
    b.labels[k] = labels[r];
  }
  return b;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  nn::Batch b = gather(rows);
  return Dataset{dims, classes, std::move(b.inputs), std::move(b.labels),
                 provenance};
}

nn::Batch Dataset::all() const {
  return nn::Batch{size(), dims, features, labels};
}

void standardize(Dataset& data) {
  const std::size_t n = data.size();
  if (n == 0) return;
  for (std::size_t j = 0; j < data.dims; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += data.features[i * data.dims + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = data.features[i * data.dims + j] - mean;
      var += c * c;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      double& v = data.features[i * data.dims + j];
      v -= mean;
      if (sd > 0.0) v /= sd;
    }
  }
}

Dataset generate_blobs(const SyntheticSpec& spec) {
  if (spec.samples == 0 || spec.dims == 0 || spec.classes < 2) {
    throw ConfigError("synthetic data needs samples >= 1, dims >= 1, classes >= 2");
  }
  if (!(spec.separation >= 0.0)) throw ConfigError("separation must be >= 0");
  Rng rng(spec.seed);
  std::vector<double> centers(spec.classes * spec.dims);
  for (double& c : centers) c = spec.separation * rng.normal();

  Dataset d;
  d.dims = spec.dims;
  d.classes = spec.classes;
  d.features.resize(spec.samples * spec.dims);
  d.labels.resize(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t label = i % spec.classes;
    d.labels[i] = static_cast<int>(label);
    for (std::size_t j = 0; j < spec.dims; ++j) {
      d.features[i * spec.dims + j] = centers[label * spec.dims + j] + rng.normal();
    }
  }
  d.provenance = fmt::format("synthetic(n={},dims={},classes={},sep={},seed={})",
                             spec.samples, spec.dims, spec.classes,
                             spec.separation, spec.seed);
  return d;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const std::vector<std::uint8_t> images = read_file(images_path);
  const std::vector<std::uint8_t> labels = read_file(labels_path);
  if (big_endian_u32(images, 0) != kIdxImagesMagic) {
    throw FormatError(fmt::format("'{}' is not an IDX image file", images_path));
  }
  if (big_endian_u32(labels, 0) != kIdxLabelsMagic) {
    throw FormatError(fmt::format("'{}' is not an IDX label file", labels_path));
  }
  const std::size_t count = big_endian_u32(images, 4);
  const std::size_t rows = big_endian_u32(images, 8);
  const std::size_t cols = big_endian_u32(images, 12);
  if (big_endian_u32(labels, 4) != count) {
    throw FormatError("IDX image and label counts differ");
  }
  const std::size_t dims = rows * cols;
  if (images.size() != 16 + count * dims || labels.size() != 8 + count) {
    throw FormatError("IDX payload size does not match its header");
  }
  Dataset d;
  d.dims = dims;
  d.features.resize(count * dims);
  for (std::size_t k = 0; k < count * dims; ++k) {
    d.features[k] = static_cast<double>(images[16 + k]) / 255.0;
  }
  d.labels.resize(count);
  for (std::size_t k = 0; k < count; ++k) d.labels[k] = labels[8 + k];
  d.classes = infer_classes(d.labels);
  d.provenance = fmt::format("idx({:016x},{:016x})", wire::fnv1a(images),
                             wire::fnv1a(labels));
  return d;
}

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw FormatError(fmt::format("cannot open '{}'", path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  if (lines.empty()) throw FormatError(fmt::format("'{}' is empty", path));

  std::vector<std::string_view> first = split_csv(lines.front());
  const bool has_header = std::any_of(first.begin(), first.end(),
                                      [](auto f) { return !to_number(f); });
  const std::size_t width = first.size();
  if (width < 2) throw FormatError("CSV needs at least one feature and a label");

  std::size_t label_idx = width - 1;
  if (!label_column.empty()) {
    if (auto idx = to_number(label_column)) {
      label_idx = static_cast<std::size_t>(*idx);
      if (label_idx >= width) {
        throw FormatError(fmt::format("CSV label column {} missing", label_column));
      }
    } else {
      if (!has_header) {
        throw FormatError("CSV label column given by name but file has no header");
      }
      auto it = std::find(first.begin(), first.end(), label_column);
      if (it == first.end()) {
        throw FormatError(fmt::format("CSV label column '{}' missing", label_column));
      }
      label_idx = static_cast<std::size_t>(it - first.begin());
    }
  }

  Dataset d;
  d.dims = width - 1;
  for (std::size_t li = has_header ? 1 : 0; li < lines.size(); ++li) {
    auto fields = split_csv(lines[li]);
    if (fields.size() != width) {
      throw FormatError(fmt::format("CSV line {} has {} fields, expected {}",
                                    li + 1, fields.size(), width));
    }
    for (std::size_t j = 0; j < width; ++j) {
      auto v = to_number(fields[j]);
      if (!v) {
        throw FormatError(fmt::format("CSV line {}: '{}' is not numeric", li + 1,
                                      fields[j]));
      }
      if (j == label_idx) {
        if (*v != std::floor(*v)) {
          throw FormatError(fmt::format("CSV line {}: label {} is not an integer",
                                        li + 1, fields[j]));
        }
        d.labels.push_back(static_cast<int>(*v));
      } else {
        d.features.push_back(*v);
      }
    }
  }
  if (d.labels.empty()) throw FormatError("CSV has no data rows");
  d.classes = infer_classes(d.labels);
  d.provenance = fmt::format("csv({:016x})", wire::fnv1a(read_file(path)));
  return d;
}

Dataset load_or_generate_dataset(const DataSource& source) {
  switch (source.kind) {
    case DataSource::Kind::kSynthetic: {
      Dataset d = generate_blobs(source.synthetic);
      standardize(d);
      return d;
    }
    case DataSource::Kind::kIdx:
      return load_idx(source.idx_images, source.idx_labels);
    case DataSource::Kind::kCsv: {
      Dataset d = load_csv(source.csv_path, source.csv_label);
      standardize(d);
      return d;
    }
  }
  throw ConfigError("unknown dataset source");
}

std::vector<DatasetSplit> partition(const Dataset& data, std::size_t clients,
                                    std::uint64_t seed) {
  if (clients == 0) throw ConfigError("need at least one client");
  if (data.size() < clients * kMinShard) {
    throw ConfigError(fmt::format(
        "{} samples are too few for {} clients (need {} per shard)", data.size(),
        clients, kMinShard));
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::derive(seed, 0x5041525449ULL));
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<DatasetSplit> splits;
  splits.reserve(clients);
  const std::size_t base = data.size() / clients;
  const std::size_t extra = data.size() % clients;
  std::size_t cursor = 0;
  for (std::size_t c = 0; c < clients; ++c) {
    const std::size_t shard = base + (c < extra ? 1 : 0);
    const auto test_n = static_cast<std::size_t>(
        std::llround(kHoldoutFraction * static_cast<double>(shard)));
    const auto val_n = static_cast<std::size_t>(
        std::llround(kHoldoutFraction * static_cast<double>(shard - test_n)));
    auto begin = order.begin() + static_cast<std::ptrdiff_t>(cursor);
    DatasetSplit s;
    s.client = c;
    s.test_rows.assign(begin, begin + static_cast<std::ptrdiff_t>(test_n));
    s.val_rows.assign(begin + static_cast<std::ptrdiff_t>(test_n),
                      begin + static_cast<std::ptrdiff_t>(test_n + val_n));
    s.train_rows.assign(begin + static_cast<std::ptrdiff_t>(test_n + val_n),
                        begin + static_cast<std::ptrdiff_t>(shard));
    s.train = data.subset(s.train_rows);
    s.val = data.subset(s.val_rows);
    s.test = data.subset(s.test_rows);
    splits.push_back(std::move(s));
    cursor += shard;
  }
  return splits;
}

}  // namespace salientgrads::data
