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

#include <array>
#include <cstddef>

#include "patchguard/image.hpp"
#include "patchguard/tensor.hpp"

namespace patchguard {

enum class ChannelOrder : std::uint8_t { RGB = 0, BGR = 1 };

/// Input normalisation stored alongside the weights. `channel_mean` and
/// `channel_std` are indexed by output channel, i.e. after reordering.
struct Preprocess {
  std::size_t target_height = 224;
  std::size_t target_width = 224;
  std::array<float, 3> channel_mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> channel_std{0.229f, 0.224f, 0.225f};
  ChannelOrder channel_order = ChannelOrder::RGB;
  float scale = 1.0f / 255.0f;

  /// Throws ValidationError("preprocess", ...) on non-positive std or size.
  void validate() const;

  friend bool operator==(const Preprocess&, const Preprocess&) = default;
};

/// Bilinear resize with half-pixel centres, edge-clamped, to float planes.
/// Returns height x width x channels interleaved values in [0, 255].
std::vector<float> resize_bilinear(const Image& image, std::size_t out_height, std::size_t out_width);

/// Resize, scale, reorder and normalise into a 3 x H x W tensor.
Tensor preprocess_image(const Image& raw, const Preprocess& pre);

}  // namespace patchguard
