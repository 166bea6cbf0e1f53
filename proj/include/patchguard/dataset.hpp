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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "patchguard/image.hpp"

namespace patchguard {

// --- splitting --------------------------------------------------------------

struct SplitSpec {
  std::uint64_t seed = 0;
  double analysis_fraction = 0.4;
  double test_fraction = 0.6;
  /// Optional class label per id (parallel to the id list). When present,
  /// each class is split separately.
  std::optional<std::vector<std::string>> stratify_key;

  void validate() const;
};

struct Split {
  std::vector<std::string> analysis;
  std::vector<std::string> test;
};

/// Seeded partition of `ids` (which must be unique). Each side keeps input
/// order. Per class, round(analysis_fraction * class_size) ids go to analysis.
Split split(std::span<const std::string> ids, const SplitSpec& spec);

// --- patches ----------------------------------------------------------------

struct FilePatch {
  std::filesystem::path path;
  friend bool operator==(const FilePatch&, const FilePatch&) = default;
};
/// Independent black or white pixels (all channels equal).
struct HighContrastNoise {
  std::uint64_t seed = 0;
  friend bool operator==(const HighContrastNoise&, const HighContrastNoise&) = default;
};
struct SolidColor {
  std::array<std::uint8_t, 3> rgb{255, 255, 255};
  friend bool operator==(const SolidColor&, const SolidColor&) = default;
};
using PatchContent = std::variant<FilePatch, HighContrastNoise, SolidColor>;

struct UniformRandom {
  std::uint64_t seed = 0;
  friend bool operator==(const UniformRandom&, const UniformRandom&) = default;
};
struct FixedPlacement {
  std::size_t x = 0;
  std::size_t y = 0;
  friend bool operator==(const FixedPlacement&, const FixedPlacement&) = default;
};
using PatchPlacement = std::variant<UniformRandom, FixedPlacement>;

inline constexpr double kDefaultPatchArea = 0.06;

struct PatchSpec {
  double area_fraction = kDefaultPatchArea;
  /// Absolute side length that overrides the area-derived one.
  std::optional<std::size_t> side_override;
  PatchContent content = HighContrastNoise{};
  PatchPlacement placement = UniformRandom{};

  friend bool operator==(const PatchSpec&, const PatchSpec&) = default;
};

struct PlacementRecord {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t side = 0;
  friend bool operator==(const PlacementRecord&, const PlacementRecord&) = default;
};

/// round(sqrt(area_fraction * height * width)) unless overridden. ConfigError
/// if the result is zero or does not fit in the image.
std::size_t patch_side(const PatchSpec& spec, std::size_t height, std::size_t width);

struct PatchedImage {
  Image image;
  PlacementRecord placement;
};

/// Overwrites a square region; every pixel outside it is left untouched.
PatchedImage apply_patch(const Image& image, const PatchSpec& spec);

/// Stable per-image seed from a run seed and an image id.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view source_id);

/// "noise", "solid:R,G,B" or "file:<path>". Seeds are not part of the key, so
/// all noise patches count as one attack source.
std::string attack_source(const PatchContent& content);

// --- labelled test sets -----------------------------------------------------

enum class Label { Negative, Positive };
std::string_view label_name(Label label);

struct LabeledSample {
  std::string source_id;
  Label label = Label::Negative;
  /// Present exactly for positives.
  std::optional<PatchSpec> provenance;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

/// floor(N/2) seeded positives; each positive gets per-image noise/placement
/// seeds derived from (seed, source_id). Output keeps input order.
std::vector<LabeledSample> build_balanced_testset(std::span<const std::string> test_ids, const PatchSpec& spec,
                                                  std::uint64_t seed);

// --- manifest ---------------------------------------------------------------

struct ManifestRecord {
  LabeledSample sample;
  std::optional<PlacementRecord> placement;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

std::string format_manifest(std::span<const ManifestRecord> records);
std::vector<ManifestRecord> parse_manifest(std::string_view text);
std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path);

/// Decodes `sources[i]`, patches it if samples[i] is positive, and writes it
/// as PNG to out_dir / samples[i].source_id. Writes out_dir/manifest.tsv last
/// and returns its records (placements resolved to fixed coordinates).
std::vector<ManifestRecord> write_testset(std::span<const LabeledSample> samples,
                                          std::span<const std::filesystem::path> sources,
                                          const std::filesystem::path& out_dir, std::size_t jobs = 1);

}  // namespace patchguard
