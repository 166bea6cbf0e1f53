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

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "patchguard/bundle.hpp"
#include "patchguard/image.hpp"
#include "patchguard/tensor.hpp"

namespace fixtures {

using patchguard::ConvLayerSpec;
using patchguard::Image;
using patchguard::Shape;
using patchguard::Tensor;

inline Tensor random_tensor(std::mt19937_64& rng, Shape shape, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> data(shape.size());
  for (auto& v : data) v = dist(rng);
  return Tensor(shape, std::move(data));
}

inline ConvLayerSpec random_conv(std::mt19937_64& rng, std::size_t in, std::size_t out, float lo = -1.0f,
                                 float hi = 1.0f, bool zero_bias = false) {
  std::uniform_real_distribution<float> dist(lo, hi);
  ConvLayerSpec spec;
  spec.in_channels = in;
  spec.out_channels = out;
  spec.kernel.resize(in * out * 9);
  for (auto& v : spec.kernel) v = dist(rng);
  spec.bias.resize(out);
  for (auto& v : spec.bias) v = zero_bias ? 0.0f : dist(rng);
  return spec;
}

inline Image random_image(std::mt19937_64& rng, std::size_t w, std::size_t h) {
  Image img(w, h, 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

inline Image uniform_image(std::size_t w, std::size_t h, std::uint8_t v) {
  Image img(w, h, 3);
  std::fill(img.pixels.begin(), img.pixels.end(), v);
  return img;
}

/// A VGG-16-shaped prefix (conv1_1 .. relu2_1) with random weights.
inline patchguard::WeightBundle vgg16_prefix(std::uint64_t seed, std::size_t size = 224) {
  std::mt19937_64 rng(seed);
  patchguard::WeightBundle b;
  b.model_name = "vgg16";
  b.preprocess.target_height = size;
  b.preprocess.target_width = size;
  auto conv = [&](const char* name, std::size_t in, std::size_t out) {
    b.layers.emplace_back(random_conv(rng, in, out, -0.1f, 0.1f));
    b.layer_names.emplace_back(name);
  };
  auto simple = [&](const char* name, patchguard::LayerOp op) {
    b.layers.push_back(op);
    b.layer_names.emplace_back(name);
  };
  conv("conv1_1", 3, 64);
  simple("relu1_1", patchguard::ReluLayer{});
  conv("conv1_2", 64, 64);
  simple("relu1_2", patchguard::ReluLayer{});
  simple("pool1", patchguard::MaxPool2x2Layer{});
  conv("conv2_1", 64, 128);
  simple("relu2_1", patchguard::ReluLayer{});
  return b;
}

/// Small conv/relu/conv/relu/pool/conv/relu bundle over `channels` channels.
inline patchguard::WeightBundle tiny_bundle(std::uint64_t seed, std::size_t size = 8, std::size_t channels = 4,
                                            bool zero_bias = false) {
  std::mt19937_64 rng(seed);
  patchguard::WeightBundle b;
  b.model_name = "tiny";
  b.preprocess.target_height = size;
  b.preprocess.target_width = size;
  b.layers = {random_conv(rng, 3, channels, -0.5f, 0.5f, zero_bias), patchguard::ReluLayer{},
              random_conv(rng, channels, channels, -0.5f, 0.5f, zero_bias), patchguard::ReluLayer{},
              patchguard::MaxPool2x2Layer{}, random_conv(rng, channels, channels, -0.5f, 0.5f, zero_bias),
              patchguard::ReluLayer{}};
  b.layer_names = {"conv1_1", "relu1_1", "conv1_2", "relu1_2", "pool1", "conv2_1", "relu2_1"};
  return b;
}

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("patchguard-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
