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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "patchguard/bundle.hpp"
#include "patchguard/tensor.hpp"

namespace patchguard {

/// A reference activation produced by another implementation: the named
/// layer's output for a fixed input tensor, under the given weights file.
///
///   {"format": "patchguard-golden-v1", "weights": "toy.pgwb", "layer": "conv1",
///    "input":  {"shape": [C, H, W], "data": [...]},
///    "output": {"shape": [C, H, W], "data": [...]}}
///
/// `weights` is resolved relative to the golden file.
struct GoldenVector {
  std::filesystem::path weights;
  std::string layer;
  Tensor input{Shape{1, 1, 1}};
  Tensor expected{Shape{1, 1, 1}};
};

inline constexpr std::string_view kGoldenFormat = "patchguard-golden-v1";

GoldenVector parse_golden(std::string_view text);
GoldenVector load_golden(const std::filesystem::path& path);
std::string format_golden(const GoldenVector& golden);

struct GoldenReplay {
  Shape output_shape;
  float max_abs_diff = 0.0f;
};

/// Runs the input through the bundle up to `layer` and compares with the
/// expected output. ShapeError if the shapes differ.
GoldenReplay replay_golden(const GoldenVector& golden, const WeightBundle& bundle);

}  // namespace patchguard
