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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patchguard/layers.hpp"
#include "patchguard/preprocess.hpp"

namespace patchguard {

/// A shallow network prefix: ordered layers with embedded weights, their
/// names, and the input normalisation the weights expect.
struct WeightBundle {
  std::string model_name;
  Preprocess preprocess;
  std::vector<LayerOp> layers;
  std::vector<std::string> layer_names;

  std::optional<std::size_t> find_layer(std::string_view name) const;

  /// Checks names, kernel shapes, conv channel chaining and preprocessing.
  /// Throws ValidationError naming the offending layer.
  void validate() const;

  friend bool operator==(const WeightBundle&, const WeightBundle&) = default;
};

inline constexpr std::uint16_t kBundleVersion = 1;

/// Serialises without validating, so malformed bundles can be produced for
/// testing. The layout is documented in README.md.
std::vector<std::uint8_t> encode_bundle(const WeightBundle& bundle);

/// Parses and validates. FormatError for structural problems (with byte
/// offset), ValidationError for semantic ones.
WeightBundle decode_bundle(std::span<const std::uint8_t> bytes);

WeightBundle load_bundle(const std::filesystem::path& path);
void save_bundle(const WeightBundle& bundle, const std::filesystem::path& path);

}  // namespace patchguard
