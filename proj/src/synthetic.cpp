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

#include "patchguard/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace patchguard::synthetic {

Image scene(std::uint64_t seed, std::size_t width, std::size_t height) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const double low = uniform(30.0, 80.0);
  const double peak = uniform(110.0, 190.0);
  const double gx = uniform(-1.0, 1.0);
  const double gy = uniform(-1.0, 1.0);

  struct Blob {
    double cx, cy, sigma, amplitude;
  };
  std::vector<Blob> blobs(1 + rng() % 3);
  for (auto& b : blobs) {
    b = Blob{uniform(0.0, static_cast<double>(width)), uniform(0.0, static_cast<double>(height)),
             uniform(0.1, 0.25) * static_cast<double>(std::min(width, height)), uniform(0.4, 1.0)};
  }
  blobs.front().amplitude = 1.0;

  std::vector<double> field(width * height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double v = 0.15 * (gx * static_cast<double>(x) / width + gy * static_cast<double>(y) / height);
      for (const auto& b : blobs) {
        const double dx = static_cast<double>(x) - b.cx;
        const double dy = static_cast<double>(y) - b.cy;
        v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      field[y * width + x] = v;
    }
  }
  const auto [fmin, fmax] = std::minmax_element(field.begin(), field.end());
  const double span = std::max(*fmax - *fmin, 1e-9);

  const double tint[3] = {uniform(0.92, 1.08), uniform(0.92, 1.08), uniform(0.92, 1.08)};
  Image image(width, height, 3);
  for (std::size_t i = 0; i < width * height; ++i) {
    const double luminance = low + (peak - low) * (field[i] - *fmin) / span;
    const double grain = uniform(-4.0, 4.0);
    for (std::size_t c = 0; c < 3; ++c) {
      image.pixels[3 * i + c] = static_cast<std::uint8_t>(std::clamp(std::lround(luminance * tint[c] + grain), 0L, 255L));
    }
  }
  return image;
}

Preprocess unit_preprocess(std::size_t size) {
  Preprocess pre;
  pre.target_height = size;
  pre.target_width = size;
  pre.channel_mean = {0.0f, 0.0f, 0.0f};
  pre.channel_std = {1.0f, 1.0f, 1.0f};
  pre.scale = 1.0f / 255.0f;
  return pre;
}

WeightBundle smoothing_bundle(std::size_t depth, std::size_t channels, std::uint64_t seed,
                              const Preprocess& preprocess, std::string model_name) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> jitter(0.5f, 1.5f);

  WeightBundle bundle;
  bundle.model_name = std::move(model_name);
  bundle.preprocess = preprocess;
  std::size_t in = 3;
  for (std::size_t d = 1; d <= depth; ++d) {
    ConvLayerSpec conv;
    conv.in_channels = in;
    conv.out_channels = channels;
    conv.kernel.resize(channels * in * 9);
    conv.bias.assign(channels, 0.0f);
    for (std::size_t o = 0; o < channels; ++o) {
      float* w = conv.kernel.data() + o * in * 9;
      float total = 0.0f;
      for (std::size_t k = 0; k < in * 9; ++k) total += (w[k] = jitter(rng));
      for (std::size_t k = 0; k < in * 9; ++k) w[k] /= total;
    }
    bundle.layers.emplace_back(std::move(conv));
    bundle.layer_names.push_back("conv" + std::to_string(d));
    bundle.layers.emplace_back(ReluLayer{});
    bundle.layer_names.push_back("relu" + std::to_string(d));
    in = channels;
  }
  return bundle;
}

}  // namespace patchguard::synthetic
