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

#include "patchguard/attention.hpp"

#include <algorithm>
#include <charconv>

#include "patchguard/error.hpp"

namespace patchguard {

std::string_view tap_name(Tap tap) { return tap == Tap::Pre ? "pre" : "post"; }

Tap parse_tap(std::string_view text) {
  if (text == "pre") return Tap::Pre;
  if (text == "post") return Tap::Post;
  throw ConfigError("tap must be 'pre' or 'post', got '" + std::string(text) + "'");
}

AttentionMap attention_map(const Tensor& activation) {
  if (activation.empty()) {
    throw ShapeError("attention map of an empty tensor");
  }
  const std::size_t plane = activation.height() * activation.width();
  AttentionMap map{activation.height(), activation.width(), std::vector<float>(plane, 0.0f)};
  for (std::size_t c = 0; c < activation.channels(); ++c) {
    const auto channel = activation.channel(c);
    for (std::size_t i = 0; i < plane; ++i) map.values[i] += channel[i];
  }
  const auto channels = static_cast<float>(activation.channels());
  for (float& v : map.values) v /= channels;
  return map;
}

Indicator indicator_ir(const AttentionMap& map) {
  if (map.values.empty()) {
    throw ShapeError("indicator of an empty attention map");
  }
  return Indicator{*std::max_element(map.values.begin(), map.values.end())};
}

std::size_t resolve_conv_layer(const WeightBundle& bundle, std::string_view layer) {
  std::optional<std::size_t> index = bundle.find_layer(layer);
  if (!index) {
    std::size_t parsed = 0;
    const auto [end, ec] = std::from_chars(layer.data(), layer.data() + layer.size(), parsed);
    if (ec == std::errc{} && end == layer.data() + layer.size() && parsed < bundle.layers.size()) {
      index = parsed;
    }
  }
  if (!index) {
    throw ConfigError("unknown layer '" + std::string(layer) + "' in bundle " + bundle.model_name);
  }
  if (!is_conv(bundle.layers[*index])) {
    throw ConfigError("layer '" + std::string(layer) + "' is a " +
                      std::string(layer_kind_name(bundle.layers[*index])) + ", not a convolution");
  }
  return *index;
}

std::size_t activation_index(const WeightBundle& bundle, std::size_t conv_index, Tap tap) {
  if (tap == Tap::Pre) return conv_index;
  const std::size_t next = conv_index + 1;
  if (next >= bundle.layers.size() || !is_relu(bundle.layers[next])) {
    throw ConfigError("layer '" + bundle.layer_names.at(conv_index) +
                      "' has no ReLU directly after it; use the pre tap");
  }
  return next;
}

Indicator indicator_at_index(const Tensor& image, const WeightBundle& bundle, std::size_t index) {
  return indicator_ir(attention_map(forward_prefix(image, bundle.layers, index)));
}

Indicator indicator_at_layer(const Tensor& image, const WeightBundle& bundle, std::string_view layer, Tap tap) {
  return indicator_at_index(image, bundle, activation_index(bundle, resolve_conv_layer(bundle, layer), tap));
}

}  // namespace patchguard
