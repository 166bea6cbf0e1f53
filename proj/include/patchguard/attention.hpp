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
#include <string>
#include <string_view>
#include <vector>

#include "patchguard/bundle.hpp"
#include "patchguard/tensor.hpp"

namespace patchguard {

/// Per-pixel mean of an activation map across its channels.
struct AttentionMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;

  float at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

/// Max-attention anomaly score of one image at one layer.
struct Indicator {
  float value = 0.0f;
};

/// Whether the indicator reads the convolution output itself or the ReLU
/// that immediately follows it.
enum class Tap { Pre, Post };

std::string_view tap_name(Tap tap);
/// Accepts "pre" or "post"; throws ConfigError otherwise.
Tap parse_tap(std::string_view text);

AttentionMap attention_map(const Tensor& activation);
Indicator indicator_ir(const AttentionMap& map);

/// Resolves a conv layer by name, or by decimal layer index when no layer has
/// that name. Throws ConfigError if it is unknown or not a convolution.
std::size_t resolve_conv_layer(const WeightBundle& bundle, std::string_view layer);

/// Index of the layer whose output is read for the given conv layer and tap.
/// Post requires a ReLU directly after the conv.
std::size_t activation_index(const WeightBundle& bundle, std::size_t conv_index, Tap tap);

/// preprocessed image -> forward prefix -> attention map -> indicator.
Indicator indicator_at_layer(const Tensor& image, const WeightBundle& bundle, std::string_view layer,
                             Tap tap = Tap::Post);
Indicator indicator_at_index(const Tensor& image, const WeightBundle& bundle, std::size_t activation_index);

}  // namespace patchguard
