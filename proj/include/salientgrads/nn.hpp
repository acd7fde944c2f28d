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
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace salientgrads::nn {

enum class Activation { kRelu, kIdentity };

/// Single valid-padding, stride-1 convolution applied to the raw input,
/// followed by ReLU. Input rows are laid out channel-major (C, H, W).
struct ConvStem {
  std::size_t in_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;

  std::size_t input_size() const { return in_channels * height * width; }
  std::size_t out_height() const { return height - kernel + 1; }
  std::size_t out_width() const { return width - kernel + 1; }
  std::size_t output_size() const {
    return out_channels * out_height() * out_width();
  }
};

struct DenseLayer {
  std::size_t out_dim = 1;
  Activation activation = Activation::kRelu;
};

/// Feed-forward classifier: optional conv stem, then dense layers. The last
/// dense layer produces logits for softmax cross-entropy.
struct Architecture {
  std::size_t input_dim = 0;
  std::optional<ConvStem> conv;
  std::vector<DenseLayer> layers;

  /// MLP with ReLU hidden layers and identity output, e.g. {4, 8, 3}.
  static Architecture mlp(std::span<const std::size_t> dims);
  static Architecture mlp(std::initializer_list<std::size_t> dims) {
    return mlp(std::span<const std::size_t>(dims.begin(), dims.size()));
  }

  /// Parses "20,64,64,4" (optionally "64:identity" per layer).
  static Architecture parse(std::string_view dims,
                            std::string_view conv_spec = {});

  std::size_t classes() const { return layers.empty() ? 0 : layers.back().out_dim; }

  /// Throws ConfigError on an invalid architecture.
  void validate() const;

  std::string describe() const;
};

struct TensorInfo {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool maskable = false;
};

/// Canonical tensor layout of the flat parameter vector: layer order,
/// weight before bias. Only weight tensors are maskable.
class Manifest {
 public:
  explicit Manifest(const Architecture& arch);
  Manifest() = default;

  /// Layout without an architecture: one tensor per run of equal flags.
  static Manifest from_flags(std::span<const std::uint8_t> maskable);

  std::span<const TensorInfo> tensors() const { return tensors_; }
  std::size_t total_size() const { return total_; }
  const std::vector<std::uint8_t>& maskable_flags() const { return maskable_; }
  std::size_t maskable_count() const { return maskable_count_; }
  bool is_maskable(std::size_t index) const { return maskable_[index] != 0; }
  const TensorInfo& tensor(std::string_view name) const;

  friend bool operator==(const Manifest& a, const Manifest& b);

 private:
  std::vector<TensorInfo> tensors_;
  std::vector<std::uint8_t> maskable_;
  std::size_t total_ = 0;
  std::size_t maskable_count_ = 0;
};

/// Flat model parameters plus their layout.
struct ParamVector {
  std::vector<double> values;
  Manifest manifest;

  std::size_t size() const { return values.size(); }
  std::span<const double> view(const TensorInfo& t) const {
    return std::span<const double>(values).subspan(t.offset, t.size);
  }
  std::span<double> view(const TensorInfo& t) {
    return std::span<double>(values).subspan(t.offset, t.size);
  }
};

struct GradVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Row-major inputs with one label per row.
struct Batch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> inputs;
  std::vector<int> labels;

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(inputs).subspan(r * cols, cols);
  }
};

struct LossResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct LossAndGradient {
  double loss = 0.0;
  double accuracy = 0.0;
  GradVector grad;
};

/// He-style fan-in uniform weights (U(-b, b), b = sqrt(6 / fan_in)), zero
/// biases. Weights are rounded to float so the model survives the 32-bit
/// wire format unchanged.
ParamVector init_model(const Architecture& arch, std::uint64_t seed);

/// Mean softmax cross-entropy and argmax accuracy over the batch.
LossResult forward_loss(const ParamVector& params, const Architecture& arch,
                        const Batch& batch);

/// Exact gradient of the batch-mean loss.
GradVector backward(const ParamVector& params, const Architecture& arch,
                    const Batch& batch);

/// One forward and one backward pass.
LossAndGradient loss_and_gradient(const ParamVector& params,
                                  const Architecture& arch, const Batch& batch);

/// theta - lr * grad.
ParamVector apply_update(const ParamVector& params, const GradVector& grad,
                         double lr);
void apply_update_in_place(ParamVector& params, const GradVector& grad,
                           double lr);

}  // namespace salientgrads::nn
