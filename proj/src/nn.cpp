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

#include "salientgrads/nn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "salientgrads/errors.hpp"
#include "salientgrads/rng.hpp"

namespace salientgrads::nn {
namespace {

std::size_t parse_size(std::string_view text, std::string_view what) {
  std::size_t value = 0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError(fmt::format("invalid {} '{}'", what, text));
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find(sep, start);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    std::string_view part = text.substr(start, stop - start);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    parts.push_back(part);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return parts;
}

// Activations of one forward pass, kept for backprop. stage[0] is the input;
// stage[i + 1] is the post-activation output of stage i.
struct Trace {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
  std::vector<std::size_t> width;  // per-sample width of post[i]
};

void conv_forward(const ConvStem& c, std::span<const double> weight,
                  std::span<const double> bias, std::span<const double> in,
                  std::span<double> out, std::size_t rows) {
  const std::size_t oh = c.out_height();
  const std::size_t ow = c.out_width();
  const std::size_t in_size = c.input_size();
  const std::size_t out_size = c.output_size();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * in_size;
    double* y = out.data() + r * out_size;
    for (std::size_t oc = 0; oc < c.out_channels; ++oc) {
      for (std::size_t py = 0; py < oh; ++py) {
        for (std::size_t px = 0; px < ow; ++px) {
          double acc = bias[oc];
          for (std::size_t ic = 0; ic < c.in_channels; ++ic) {
            for (std::size_t ky = 0; ky < c.kernel; ++ky) {
              const double* xrow =
                  x + (ic * c.height + py + ky) * c.width + px;
              const double* wrow =
                  weight.data() +
                  ((oc * c.in_channels + ic) * c.kernel + ky) * c.kernel;
              for (std::size_t kx = 0; kx < c.kernel; ++kx) {
                acc += wrow[kx] * xrow[kx];
              }
            }
          }
          y[(oc * oh + py) * ow + px] = acc;
        }
      }
    }
  }
}

void conv_backward(const ConvStem& c, std::span<const double> in,
                   std::span<const double> dout, std::span<double> dweight,
                   std::span<double> dbias, std::size_t rows) {
  const std::size_t oh = c.out_height();
  const std::size_t ow = c.out_width();
  const std::size_t in_size = c.input_size();
  const std::size_t out_size = c.output_size();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * in_size;
    const double* dy = dout.data() + r * out_size;
    for (std::size_t oc = 0; oc < c.out_channels; ++oc) {
      for (std::size_t py = 0; py < oh; ++py) {
        for (std::size_t px = 0; px < ow; ++px) {
          const double g = dy[(oc * oh + py) * ow + px];
          if (g == 0.0) continue;
          dbias[oc] += g;
          for (std::size_t ic = 0; ic < c.in_channels; ++ic) {
            for (std::size_t ky = 0; ky < c.kernel; ++ky) {
              const double* xrow =
                  x + (ic * c.height + py + ky) * c.width + px;
              double* dwrow =
                  dweight.data() +
                  ((oc * c.in_channels + ic) * c.kernel + ky) * c.kernel;
              for (std::size_t kx = 0; kx < c.kernel; ++kx) {
                dwrow[kx] += g * xrow[kx];
              }
            }
          }
        }
      }
    }
  }
}

void check_inputs(const ParamVector& params, const Architecture& arch,
                  const Batch& batch) {
  if (batch.rows == 0) throw DimensionError("empty batch");
  if (batch.cols != arch.input_dim) {
    throw DimensionError(fmt::format("batch has {} features, model expects {}",
                                     batch.cols, arch.input_dim));
  }
  if (batch.inputs.size() != batch.rows * batch.cols ||
      batch.labels.size() != batch.rows) {
    throw DimensionError("batch inputs/labels do not match its row count");
  }
  const std::size_t classes = arch.classes();
  for (int label : batch.labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw DimensionError(fmt::format("label {} outside [0, {})", label, classes));
    }
  }
  if (params.values.size() != params.manifest.total_size() ||
      params.manifest.total_size() != Manifest(arch).total_size()) {
    throw DimensionError("parameter vector does not match the architecture");
  }
}

Trace forward(const ParamVector& params, const Architecture& arch,
              const Batch& batch) {
  Trace t;
  const std::size_t rows = batch.rows;
  t.post.push_back(batch.inputs);
  t.pre.emplace_back();
  t.width.push_back(batch.cols);
  auto tensors = params.manifest.tensors();
  std::size_t ti = 0;

  if (arch.conv) {
    const ConvStem& c = *arch.conv;
    std::vector<double> z(rows * c.output_size());
    conv_forward(c, params.view(tensors[ti]), params.view(tensors[ti + 1]),
                 t.post.back(), z, rows);
    ti += 2;
    std::vector<double> a(z.size());
    std::transform(z.begin(), z.end(), a.begin(),
                   [](double v) { return v > 0.0 ? v : 0.0; });
    t.pre.push_back(std::move(z));
    t.post.push_back(std::move(a));
    t.width.push_back(c.output_size());
  }

  for (const DenseLayer& layer : arch.layers) {
    const std::size_t in_dim = t.width.back();
    const std::size_t out_dim = layer.out_dim;
    auto w = params.view(tensors[ti]);
    auto b = params.view(tensors[ti + 1]);
    ti += 2;
    const std::vector<double>& x = t.post.back();
    std::vector<double> z(rows * out_dim);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x.data() + r * in_dim;
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double* wo = w.data() + o * in_dim;
        double acc = b[o];
        for (std::size_t i = 0; i < in_dim; ++i) acc += wo[i] * xr[i];
        z[r * out_dim + o] = acc;
      }
    }
    std::vector<double> a = z;
    if (layer.activation == Activation::kRelu) {
      for (double& v : a) v = v > 0.0 ? v : 0.0;
    }
    t.pre.push_back(std::move(z));
    t.post.push_back(std::move(a));
    t.width.push_back(out_dim);
  }
  return t;
}

// Mean cross-entropy, accuracy, and (optionally) d loss / d logits.
LossResult softmax_cross_entropy(std::span<const double> logits,
                                 std::span<const int> labels,
                                 std::size_t classes,
                                 std::vector<double>* dlogits) {
  const std::size_t rows = labels.size();
  double total = 0.0;
  std::size_t correct = 0;
  if (dlogits) dlogits->assign(logits.size(), 0.0);
  const double inv_rows = 1.0 / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.data() + r * classes;
    std::size_t argmax = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (z[c] > z[argmax]) argmax = c;
    }
    const double zmax = z[argmax];
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(z[c] - zmax);
    const double log_denom = std::log(denom);
    const auto label = static_cast<std::size_t>(labels[r]);
    total += log_denom - (z[label] - zmax);
    if (argmax == label) ++correct;
    if (dlogits) {
      double* d = dlogits->data() + r * classes;
      for (std::size_t c = 0; c < classes; ++c) {
        const double p = std::exp(z[c] - zmax - log_denom);
        d[c] = (p - (c == label ? 1.0 : 0.0)) * inv_rows;
      }
    }
  }
  LossResult result{total * inv_rows,
                    static_cast<double>(correct) * inv_rows};
  if (!std::isfinite(result.loss)) {
    throw NumericError("non-finite loss; parameters have diverged");
  }
  return result;
}

void check_finite(std::span<const double> values, std::string_view what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(fmt::format("non-finite {}", what));
    }
  }
}

}  // namespace

Architecture Architecture::mlp(std::span<const std::size_t> dims) {
  Architecture arch;
  if (dims.empty()) throw ConfigError("architecture needs an input dimension");
  arch.input_dim = dims.front();
  for (std::size_t i = 1; i < dims.size(); ++i) {
    const bool last = i + 1 == dims.size();
    arch.layers.push_back(
        {dims[i], last ? Activation::kIdentity : Activation::kRelu});
  }
  arch.validate();
  return arch;
}

Architecture Architecture::parse(std::string_view dims,
                                 std::string_view conv_spec) {
  Architecture arch;
  auto parts = split(dims, ',');
  if (parts.size() < 2) {
    throw ConfigError(fmt::format(
        "architecture '{}' needs input and output dimensions", dims));
  }
  arch.input_dim = parse_size(parts[0], "input dimension");
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const bool last = i + 1 == parts.size();
    std::string_view part = parts[i];
    Activation act = last ? Activation::kIdentity : Activation::kRelu;
    if (auto colon = part.find(':'); colon != std::string_view::npos) {
      const std::string_view name = part.substr(colon + 1);
      if (name == "relu") {
        act = Activation::kRelu;
      } else if (name == "identity") {
        act = Activation::kIdentity;
      } else {
        throw ConfigError(fmt::format("unknown activation '{}'", name));
      }
      part = part.substr(0, colon);
    }
    arch.layers.push_back({parse_size(part, "layer width"), act});
  }
  if (!conv_spec.empty()) {
    auto c = split(conv_spec, ',');
    if (c.size() != 5) {
      throw ConfigError(fmt::format(
          "conv spec '{}' must be channels,height,width,filters,kernel",
          conv_spec));
    }
    arch.conv = ConvStem{parse_size(c[0], "conv channels"),
                         parse_size(c[1], "conv height"),
                         parse_size(c[2], "conv width"),
                         parse_size(c[3], "conv filters"),
                         parse_size(c[4], "conv kernel")};
  }
  arch.validate();
  return arch;
}

void Architecture::validate() const {
  if (layers.empty()) throw ConfigError("architecture has no layers");
  if (input_dim == 0) throw ConfigError("input dimension must be >= 1");
  for (const DenseLayer& l : layers) {
    if (l.out_dim == 0) throw ConfigError("layer width must be >= 1");
  }
  if (conv) {
    const ConvStem& c = *conv;
    if (c.in_channels == 0 || c.height == 0 || c.width == 0 ||
        c.out_channels == 0 || c.kernel == 0) {
      throw ConfigError("conv dimensions must be >= 1");
    }
    if (c.kernel > c.height || c.kernel > c.width) {
      throw ConfigError("conv kernel larger than input");
    }
    if (c.input_size() != input_dim) {
      throw ConfigError(fmt::format(
          "conv input {}x{}x{} does not match input dimension {}",
          c.in_channels, c.height, c.width, input_dim));
    }
  }
}

std::string Architecture::describe() const {
  std::string out;
  if (conv) {
    out += fmt::format("conv[{}x{}x{} -> {}@{}x{}] ", conv->in_channels,
                       conv->height, conv->width, conv->out_channels,
                       conv->kernel, conv->kernel);
  }
  out += fmt::format("mlp[{}", input_dim);
  for (const DenseLayer& l : layers) out += fmt::format(",{}", l.out_dim);
  return out + "]";
}

Manifest::Manifest(const Architecture& arch) {
  arch.validate();
  auto add = [this](std::string name, std::vector<std::size_t> shape,
                    bool maskable) {
    std::size_t size = 1;
    for (std::size_t s : shape) size *= s;
    tensors_.push_back({std::move(name), std::move(shape), total_, size, maskable});
    total_ += size;
    maskable_.insert(maskable_.end(), size, maskable ? 1 : 0);
    if (maskable) maskable_count_ += size;
  };
  std::size_t in_dim = arch.input_dim;
  if (arch.conv) {
    const ConvStem& c = *arch.conv;
    add("conv0.weight", {c.out_channels, c.in_channels, c.kernel, c.kernel}, true);
    add("conv0.bias", {c.out_channels}, false);
    in_dim = c.output_size();
  }
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const std::size_t out_dim = arch.layers[i].out_dim;
    add(fmt::format("dense{}.weight", i), {out_dim, in_dim}, true);
    add(fmt::format("dense{}.bias", i), {out_dim}, false);
    in_dim = out_dim;
  }
}

Manifest Manifest::from_flags(std::span<const std::uint8_t> maskable) {
  Manifest m;
  std::size_t start = 0;
  while (start < maskable.size()) {
    std::size_t end = start;
    while (end < maskable.size() && (maskable[end] != 0) == (maskable[start] != 0)) {
      ++end;
    }
    const bool flag = maskable[start] != 0;
    m.tensors_.push_back({fmt::format("segment{}", m.tensors_.size()),
                          {end - start}, start, end - start, flag});
    if (flag) m.maskable_count_ += end - start;
    start = end;
  }
  m.maskable_.reserve(maskable.size());
  for (std::uint8_t f : maskable) m.maskable_.push_back(f ? 1 : 0);
  m.total_ = maskable.size();
  return m;
}

const TensorInfo& Manifest::tensor(std::string_view name) const {
  for (const TensorInfo& t : tensors_) {
    if (t.name == name) return t;
  }
  throw DimensionError(fmt::format("no tensor named '{}'", name));
}

bool operator==(const Manifest& a, const Manifest& b) {
  if (a.total_ != b.total_ || a.tensors_.size() != b.tensors_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    if (a.tensors_[i].name != b.tensors_[i].name ||
        a.tensors_[i].shape != b.tensors_[i].shape) {
      return false;
    }
  }
  return true;
}

ParamVector init_model(const Architecture& arch, std::uint64_t seed) {
  ParamVector params{{}, Manifest(arch)};
  params.values.assign(params.manifest.total_size(), 0.0);
  Rng rng(seed);
  for (const TensorInfo& t : params.manifest.tensors()) {
    if (!t.maskable) continue;
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < t.shape.size(); ++i) fan_in *= t.shape[i];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& w : params.view(t)) {
      w = static_cast<float>(rng.uniform(-bound, bound));
    }
  }
  return params;
}

LossResult forward_loss(const ParamVector& params, const Architecture& arch,
                        const Batch& batch) {
  check_inputs(params, arch, batch);
  Trace t = forward(params, arch, batch);
  check_finite(t.post.back(), "logits");
  return softmax_cross_entropy(t.post.back(), batch.labels, arch.classes(),
                               nullptr);
}

LossAndGradient loss_and_gradient(const ParamVector& params,
                                  const Architecture& arch,
                                  const Batch& batch) {
  check_inputs(params, arch, batch);
  Trace t = forward(params, arch, batch);
  check_finite(t.post.back(), "logits");
  std::vector<double> delta;
  LossResult lr = softmax_cross_entropy(t.post.back(), batch.labels,
                                        arch.classes(), &delta);

  GradVector grad{std::vector<double>(params.size(), 0.0)};
  auto tensors = params.manifest.tensors();
  const std::size_t rows = batch.rows;
  const std::size_t first_dense_stage = arch.conv ? 2 : 1;

  // delta holds dL/d(post-activation) of the current stage; the output layer
  // is identity or relu per its spec.
  for (std::size_t li = arch.layers.size(); li-- > 0;) {
    const std::size_t stage = first_dense_stage + li;
    const DenseLayer& layer = arch.layers[li];
    if (layer.activation == Activation::kRelu) {
      const std::vector<double>& z = t.pre[stage];
      for (std::size_t k = 0; k < delta.size(); ++k) {
        if (z[k] <= 0.0) delta[k] = 0.0;
      }
    }
    const std::size_t ti = (arch.conv ? 2 : 0) + 2 * li;
    const TensorInfo& wt = tensors[ti];
    const TensorInfo& bt = tensors[ti + 1];
    const std::size_t in_dim = t.width[stage - 1];
    const std::size_t out_dim = layer.out_dim;
    const std::vector<double>& x = t.post[stage - 1];
    auto w = params.view(wt);
    std::span<double> dw(grad.values.data() + wt.offset, wt.size);
    std::span<double> db(grad.values.data() + bt.offset, bt.size);
    const bool need_dx = stage - 1 > 0;
    std::vector<double> dx(need_dx ? rows * in_dim : 0, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x.data() + r * in_dim;
      const double* dr = delta.data() + r * out_dim;
      double* dxr = need_dx ? dx.data() + r * in_dim : nullptr;
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double g = dr[o];
        db[o] += g;
        if (g == 0.0) continue;
        double* dwo = dw.data() + o * in_dim;
        const double* wo = w.data() + o * in_dim;
        for (std::size_t i = 0; i < in_dim; ++i) dwo[i] += g * xr[i];
        if (dxr) {
          for (std::size_t i = 0; i < in_dim; ++i) dxr[i] += g * wo[i];
        }
      }
    }
    delta = std::move(dx);
  }

  if (arch.conv) {
    const std::vector<double>& z = t.pre[1];
    for (std::size_t k = 0; k < delta.size(); ++k) {
      if (z[k] <= 0.0) delta[k] = 0.0;
    }
    const TensorInfo& wt = tensors[0];
    const TensorInfo& bt = tensors[1];
    conv_backward(*arch.conv, t.post[0], delta,
                  std::span<double>(grad.values.data() + wt.offset, wt.size),
                  std::span<double>(grad.values.data() + bt.offset, bt.size),
                  rows);
  }
  check_finite(grad.values, "gradient");
  return {lr.loss, lr.accuracy, std::move(grad)};
}

GradVector backward(const ParamVector& params, const Architecture& arch,
                    const Batch& batch) {
  return loss_and_gradient(params, arch, batch).grad;
}

void apply_update_in_place(ParamVector& params, const GradVector& grad,
                           double lr) {
  if (grad.size() != params.size()) {
    throw DimensionError(fmt::format("gradient length {} != parameter length {}",
                                     grad.size(), params.size()));
  }
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    params.values[i] -= lr * grad.values[i];
  }
}

ParamVector apply_update(const ParamVector& params, const GradVector& grad,
                         double lr) {
  ParamVector out = params;
  apply_update_in_place(out, grad, lr);
  return out;
}

}  // namespace salientgrads::nn
