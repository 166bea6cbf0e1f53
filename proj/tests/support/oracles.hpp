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

// Brute-force reference implementations. Written directly from the
// mathematical definitions and kept free of any library kernel code so they
// can check it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "patchguard/image.hpp"
#include "patchguard/layers.hpp"
#include "patchguard/preprocess.hpp"
#include "patchguard/tensor.hpp"

namespace oracle {

using patchguard::ConvLayerSpec;
using patchguard::Image;
using patchguard::Tensor;

/// out[o][y][x] = bias[o] + sum_{i,dy,dx} k[o][i][dy][dx] * in[i][y+dy-1][x+dx-1],
/// zero outside the image, accumulated in double.
inline std::vector<double> conv3x3(const Tensor& in, const ConvLayerSpec& spec) {
  const std::size_t C = in.channels(), H = in.height(), W = in.width(), O = spec.out_channels;
  std::vector<double> out(O * H * W);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        double acc = spec.bias[o];
        for (std::size_t i = 0; i < C; ++i)
          for (std::size_t dy = 0; dy < 3; ++dy)
            for (std::size_t dx = 0; dx < 3; ++dx) {
              const long sy = static_cast<long>(y + dy) - 1;
              const long sx = static_cast<long>(x + dx) - 1;
              if (sy < 0 || sx < 0 || sy >= static_cast<long>(H) || sx >= static_cast<long>(W)) continue;
              acc += static_cast<double>(spec.kernel[((o * C + i) * 3 + dy) * 3 + dx]) *
                     in.at(i, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
        out[(o * H + y) * W + x] = acc;
      }
  return out;
}

inline std::vector<float> maxpool2x2(const Tensor& in) {
  const std::size_t H = in.height() / 2, W = in.width() / 2;
  std::vector<float> out;
  for (std::size_t c = 0; c < in.channels(); ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        std::vector<float> window;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) window.push_back(in.at(c, 2 * y + dy, 2 * x + dx));
        out.push_back(*std::max_element(window.begin(), window.end()));
      }
  return out;
}

/// Per-pixel channel mean in double.
inline std::vector<double> attention(const Tensor& in) {
  std::vector<double> out;
  for (std::size_t y = 0; y < in.height(); ++y)
    for (std::size_t x = 0; x < in.width(); ++x) {
      double sum = 0.0;
      for (std::size_t c = 0; c < in.channels(); ++c) sum += in.at(c, y, x);
      out.push_back(sum / static_cast<double>(in.channels()));
    }
  return out;
}

/// Mean-of-attention indicator, the alternative statistic. Test support only.
inline double mean_indicator(const std::vector<float>& attention) {
  double sum = 0.0;
  for (float v : attention) sum += v;
  return sum / static_cast<double>(attention.size());
}

/// Bilinear sample at continuous source coordinates with edge clamping.
inline double bilinear_at(const Image& img, double sy, double sx, std::size_t c) {
  sy = std::min(std::max(sy, 0.0), static_cast<double>(img.height - 1));
  sx = std::min(std::max(sx, 0.0), static_cast<double>(img.width - 1));
  const double y0 = std::floor(sy), x0 = std::floor(sx);
  const double y1 = std::min(y0 + 1.0, static_cast<double>(img.height - 1));
  const double x1 = std::min(x0 + 1.0, static_cast<double>(img.width - 1));
  const double wy = sy - y0, wx = sx - x0;
  auto px = [&](double yy, double xx) {
    return static_cast<double>(img.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), c));
  };
  return (1 - wy) * (1 - wx) * px(y0, x0) + (1 - wy) * wx * px(y0, x1) + wy * (1 - wx) * px(y1, x0) +
         wy * wx * px(y1, x1);
}

/// Half-pixel-centre resize followed by (v * scale - mean) / std.
inline std::vector<double> preprocess(const Image& img, const patchguard::Preprocess& pre) {
  const std::size_t H = pre.target_height, W = pre.target_width;
  std::vector<double> out(3 * H * W);
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t src_c = pre.channel_order == patchguard::ChannelOrder::BGR ? 2 - c : c;
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double sy = (y + 0.5) * static_cast<double>(img.height) / H - 0.5;
        const double sx = (x + 0.5) * static_cast<double>(img.width) / W - 0.5;
        const double v = bilinear_at(img, sy, sx, src_c);
        out[(c * H + y) * W + x] = (v * pre.scale - pre.channel_mean[c]) / pre.channel_std[c];
      }
  }
  return out;
}

/// Scans candidate thresholds from the smallest upward and returns the first
/// with count(v <= t) >= p * n. Everything exact: p is an f32 and n is small.
inline float threshold_by_enumeration(const std::vector<float>& values, float p) {
  std::vector<float> candidates = values;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  const double need = static_cast<double>(p) * static_cast<double>(values.size());
  for (float t : candidates) {
    const auto count = static_cast<double>(std::count_if(values.begin(), values.end(), [&](float v) { return v <= t; }));
    if (count >= need) return t;
  }
  return candidates.back();
}

}  // namespace oracle
