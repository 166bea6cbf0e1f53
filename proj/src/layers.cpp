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

#include "patchguard/layers.hpp"

#include <algorithm>
#include <string>

#include "patchguard/error.hpp"

namespace patchguard {

void ConvLayerSpec::check() const {
  if (in_channels == 0 || out_channels == 0) {
    throw ShapeError("convolution channel counts must be positive");
  }
  if (kernel.size() != out_channels * in_channels * 9) {
    throw ShapeError("kernel length " + std::to_string(kernel.size()) + " != out*in*9 = " +
                     std::to_string(out_channels * in_channels * 9));
  }
  if (bias.size() != out_channels) {
    throw ShapeError("bias length " + std::to_string(bias.size()) + " != out_channels " +
                     std::to_string(out_channels));
  }
}

std::string_view layer_kind_name(const LayerOp& op) {
  switch (op.index()) {
    case 0:
      return "conv3x3";
    case 1:
      return "relu";
    default:
      return "maxpool2x2";
  }
}

Tensor conv3x3(const Tensor& input, const ConvLayerSpec& spec) {
  spec.check();
  if (input.channels() != spec.in_channels) {
    throw ShapeError("conv3x3 expects " + std::to_string(spec.in_channels) + " input channels, got " +
                     std::to_string(input.channels()));
  }
  if (!input.all_finite()) {
    throw NumericError("conv3x3 input contains non-finite values");
  }

  const std::size_t height = input.height();
  const std::size_t width = input.width();
  const std::size_t plane = height * width;
  std::vector<float> out(spec.out_channels * plane);

  for (std::size_t o = 0; o < spec.out_channels; ++o) {
    float* dst = out.data() + o * plane;
    std::fill(dst, dst + plane, spec.bias[o]);
    for (std::size_t i = 0; i < spec.in_channels; ++i) {
      const float* src = input.channel(i).data();
      for (std::size_t ky = 0; ky < 3; ++ky) {
        // Output rows whose source row y + ky - 1 lies inside the image.
        const std::size_t y_begin = ky == 0 ? 1 : 0;
        const std::size_t y_end = ky == 2 ? height - 1 : height;
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const float w = spec.weight(o, i, ky, kx);
          const std::size_t x_begin = kx == 0 ? 1 : 0;
          const std::size_t x_end = kx == 2 ? width - 1 : width;
          for (std::size_t y = y_begin; y < y_end; ++y) {
            float* row = dst + y * width;
            const float* srow = src + (y + ky - 1) * width + kx;
            for (std::size_t x = x_begin; x < x_end; ++x) {
              row[x] += w * srow[x - 1];
            }
          }
        }
      }
    }
  }
  return Tensor(Shape{spec.out_channels, height, width}, std::move(out));
}

Tensor relu(const Tensor& input) {
  std::vector<float> out(input.data().begin(), input.data().end());
  for (float& v : out) {
    v = std::max(v, 0.0f);
  }
  return Tensor(input.shape(), std::move(out));
}

Tensor maxpool2x2(const Tensor& input) {
  if (input.height() % 2 != 0 || input.width() % 2 != 0) {
    throw ShapeError("maxpool2x2 requires even height and width, got " + std::to_string(input.height()) + "x" +
                     std::to_string(input.width()));
  }
  const std::size_t oh = input.height() / 2;
  const std::size_t ow = input.width() / 2;
  const std::size_t iw = input.width();
  std::vector<float> out(input.channels() * oh * ow);
  for (std::size_t c = 0; c < input.channels(); ++c) {
    const float* src = input.channel(c).data();
    float* dst = out.data() + c * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      const float* r0 = src + (2 * y) * iw;
      const float* r1 = r0 + iw;
      for (std::size_t x = 0; x < ow; ++x) {
        dst[y * ow + x] = std::max(std::max(r0[2 * x], r0[2 * x + 1]), std::max(r1[2 * x], r1[2 * x + 1]));
      }
    }
  }
  return Tensor(Shape{input.channels(), oh, ow}, std::move(out));
}

Tensor apply_layer(const Tensor& input, const LayerOp& op) {
  return std::visit(
      [&](const auto& layer) -> Tensor {
        using T = std::decay_t<decltype(layer)>;
        if constexpr (std::is_same_v<T, ConvLayerSpec>) {
          return conv3x3(input, layer);
        } else if constexpr (std::is_same_v<T, ReluLayer>) {
          return relu(input);
        } else {
          return maxpool2x2(input);
        }
      },
      op);
}

Shape layer_output_shape(const Shape& in, const LayerOp& op) {
  if (const auto* conv = std::get_if<ConvLayerSpec>(&op)) {
    if (in.channels != conv->in_channels) {
      throw ShapeError("conv3x3 expects " + std::to_string(conv->in_channels) + " input channels, got " +
                       std::to_string(in.channels));
    }
    return Shape{conv->out_channels, in.height, in.width};
  }
  if (std::holds_alternative<MaxPool2x2Layer>(op)) {
    if (in.height % 2 != 0 || in.width % 2 != 0) {
      throw ShapeError("maxpool2x2 requires even height and width, got " + std::to_string(in.height) + "x" +
                       std::to_string(in.width));
    }
    return Shape{in.channels, in.height / 2, in.width / 2};
  }
  return in;
}

namespace {

void check_upto(std::span<const LayerOp> layers, std::size_t upto) {
  if (upto >= layers.size()) {
    throw ConfigError("layer index " + std::to_string(upto) + " out of range for " +
                      std::to_string(layers.size()) + " layers");
  }
}

template <typename Fn>
auto with_layer_index(std::size_t index, Fn&& fn) {
  try {
    return fn();
  } catch (const ShapeError& e) {
    if (e.layer()) throw;
    throw ShapeError(e.what(), index);
  } catch (const NumericError& e) {
    if (e.layer()) throw;
    throw NumericError(e.what(), index);
  }
}

}  // namespace

Shape prefix_output_shape(const Shape& in, std::span<const LayerOp> layers, std::size_t upto) {
  check_upto(layers, upto);
  Shape shape = in;
  for (std::size_t i = 0; i <= upto; ++i) {
    shape = with_layer_index(i, [&] { return layer_output_shape(shape, layers[i]); });
  }
  return shape;
}

Tensor forward_prefix(const Tensor& input, std::span<const LayerOp> layers, std::size_t upto) {
  check_upto(layers, upto);
  Tensor current = with_layer_index(0, [&] { return apply_layer(input, layers[0]); });
  for (std::size_t i = 1; i <= upto; ++i) {
    current = with_layer_index(i, [&] { return apply_layer(current, layers[i]); });
  }
  return current;
}

std::vector<Tensor> forward_taps(const Tensor& input, std::span<const LayerOp> layers,
                                 std::span<const std::size_t> taps) {
  if (taps.empty()) return {};
  const std::size_t deepest = *std::max_element(taps.begin(), taps.end());
  check_upto(layers, deepest);

  std::vector<Tensor> out(taps.size());
  Tensor current = input;
  for (std::size_t i = 0; i <= deepest; ++i) {
    current = with_layer_index(i, [&] { return apply_layer(current, layers[i]); });
    for (std::size_t t = 0; t < taps.size(); ++t) {
      if (taps[t] == i) out[t] = current;
    }
  }
  return out;
}

}  // namespace patchguard
