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

#include "patchguard/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "patchguard/error.hpp"

namespace patchguard {

void Preprocess::validate() const {
  if (target_height == 0 || target_width == 0) {
    throw ValidationError("preprocess", "target size must be positive");
  }
  for (float s : channel_std) {
    if (!(s > 0.0f) || !std::isfinite(s)) {
      throw ValidationError("preprocess", "channel_std must be strictly positive and finite");
    }
  }
  for (float m : channel_mean) {
    if (!std::isfinite(m)) throw ValidationError("preprocess", "channel_mean must be finite");
  }
  if (!std::isfinite(scale)) throw ValidationError("preprocess", "scale must be finite");
  if (channel_order != ChannelOrder::RGB && channel_order != ChannelOrder::BGR) {
    throw ValidationError("preprocess", "unknown channel order");
  }
}

namespace {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  float frac;
};

std::vector<Tap> axis_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(src);
    taps[i] = Tap{lo, std::min(lo + 1, in - 1), static_cast<float>(src - static_cast<double>(lo))};
  }
  return taps;
}

}  // namespace

std::vector<float> resize_bilinear(const Image& image, std::size_t out_height, std::size_t out_width) {
  const std::size_t ch = image.channels;
  std::vector<float> out(out_height * out_width * ch);
  if (out_height == image.height && out_width == image.width) {
    std::copy(image.pixels.begin(), image.pixels.end(), out.begin());
    return out;
  }
  const auto ys = axis_taps(image.height, out_height);
  const auto xs = axis_taps(image.width, out_width);
  for (std::size_t y = 0; y < out_height; ++y) {
    const Tap& ty = ys[y];
    for (std::size_t x = 0; x < out_width; ++x) {
      const Tap& tx = xs[x];
      for (std::size_t c = 0; c < ch; ++c) {
        const float p00 = image.at(ty.lo, tx.lo, c);
        const float p01 = image.at(ty.lo, tx.hi, c);
        const float p10 = image.at(ty.hi, tx.lo, c);
        const float p11 = image.at(ty.hi, tx.hi, c);
        const float top = p00 + (p01 - p00) * tx.frac;
        const float bottom = p10 + (p11 - p10) * tx.frac;
        out[(y * out_width + x) * ch + c] = top + (bottom - top) * ty.frac;
      }
    }
  }
  return out;
}

Tensor preprocess_image(const Image& raw, const Preprocess& pre) {
  if (raw.channels != 3) {
    throw ShapeError("preprocess expects a 3-channel image, got " + std::to_string(raw.channels));
  }
  if (raw.width == 0 || raw.height == 0 || raw.pixels.size() != raw.width * raw.height * 3) {
    throw ShapeError("image buffer does not match its dimensions");
  }
  pre.validate();
  const std::size_t h = pre.target_height;
  const std::size_t w = pre.target_width;
  const auto resized = resize_bilinear(raw, h, w);

  std::vector<float> out(3 * h * w);
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t src_c = pre.channel_order == ChannelOrder::BGR ? 2 - c : c;
    const float mean = pre.channel_mean[c];
    const float stddev = pre.channel_std[c];
    float* dst = out.data() + c * h * w;
    for (std::size_t i = 0; i < h * w; ++i) {
      dst[i] = (resized[i * 3 + src_c] * pre.scale - mean) / stddev;
    }
  }
  return Tensor(Shape{3, h, w}, std::move(out));
}

}  // namespace patchguard
