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
#include <cstdint>
#include <string>

#include "patchguard/bundle.hpp"
#include "patchguard/image.hpp"

namespace patchguard::synthetic {

/// Smooth "natural-looking" RGB scene: a dim background, a gentle gradient and
/// a few soft bright blobs whose peak brightness varies per seed, plus faint
/// pixel noise. Deterministic in (seed, width, height).
Image scene(std::uint64_t seed, std::size_t width, std::size_t height);

/// Inputs scaled to [0, 1] with no mean/std shift, so every activation of a
/// non-negative network stays non-negative.
Preprocess unit_preprocess(std::size_t size);

/// `depth` blocks of conv(3x3, non-negative weights, each output channel's
/// weights summing to 1, zero bias) + ReLU, named conv1/relu1, conv2/relu2...
/// Every layer is a local weighted average, so deeper layers blur more.
WeightBundle smoothing_bundle(std::size_t depth, std::size_t channels, std::uint64_t seed,
                              const Preprocess& preprocess, std::string model_name = "smooth-toy");

}  // namespace patchguard::synthetic
