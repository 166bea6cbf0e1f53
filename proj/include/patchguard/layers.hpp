// Copyright 2026 The PatchGuard Authors
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

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "patchguard/tensor.hpp"

namespace patchguard {

/// 3x3 convolution, stride 1, zero padding 1. Kernel layout is
/// [out][in][ky][kx].
struct ConvLayerSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<float> kernel;
  std::vector<float> bias;

  float weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return kernel[((o * in_channels + i) * 3 + ky) * 3 + kx];
  }
  /// Throws ShapeError if kernel/bias lengths disagree with the channel counts.
  void check() const;

  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct ReluLayer {
  friend bool operator==(const ReluLayer&, const ReluLayer&) = default;
};

struct MaxPool2x2Layer {
  friend bool operator==(const MaxPool2x2Layer&, const MaxPool2x2Layer&) = default;
};

using LayerOp = std::variant<ConvLayerSpec, ReluLayer, MaxPool2x2Layer>;

std::string_view layer_kind_name(const LayerOp& op);
inline bool is_conv(const LayerOp& op) { return std::holds_alternative<ConvLayerSpec>(op); }
inline bool is_relu(const LayerOp& op) { return std::holds_alternative<ReluLayer>(op); }

Tensor conv3x3(const Tensor& input, const ConvLayerSpec& spec);
Tensor relu(const Tensor& input);
Tensor maxpool2x2(const Tensor& input);
Tensor apply_layer(const Tensor& input, const LayerOp& op);

/// Output shape of `op` for an input of `in`, without evaluating it.
Shape layer_output_shape(const Shape& in, const LayerOp& op);

/// Shape after layers[0..=upto].
Shape prefix_output_shape(const Shape& in, std::span<const LayerOp> layers, std::size_t upto);

/// Applies layers[0..=upto] in order and returns the activation at `upto`.
/// Shape and numeric errors carry the index of the failing layer.
Tensor forward_prefix(const Tensor& input, std::span<const LayerOp> layers, std::size_t upto);

/// Single forward pass returning the activations at each of `taps`
/// (in the order given). Runs only as deep as the largest tap.
std::vector<Tensor> forward_taps(const Tensor& input, std::span<const LayerOp> layers,
                                 std::span<const std::size_t> taps);

}  // namespace patchguard
