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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "patchguard/attention.hpp"
#include "patchguard/bundle.hpp"

namespace patchguard {

inline constexpr float kDefaultConfidence = 0.95f;

struct IndicatorSample {
  float value = 0.0f;
  std::string source_id;
};

/// Result of inverting the clean-sample coverage condition at confidence p.
struct ThresholdEstimate {
  float theta = 0.0f;
  /// Fraction of samples with value <= theta. At least p; ties can push it higher.
  double achieved_fraction = 0.0;
  /// 1-based order statistic chosen, ceil(p * n).
  std::size_t rank = 0;
  std::size_t n_samples = 0;
};

/// Smallest order statistic theta such that at least a fraction p of the
/// samples satisfy value <= theta. Throws ConfigError on empty input, p
/// outside (0, 1], or non-finite samples.
ThresholdEstimate calibrate(std::span<const IndicatorSample> samples, float p = kDefaultConfidence);

/// The deployable result of calibration: one scalar threshold for one
/// (model, layer, tap) combination.
struct CalibrationProfile {
  std::string model_name;
  std::string layer;
  Tap tap = Tap::Post;
  float confidence_p = kDefaultConfidence;
  float theta = 0.0f;
  std::size_t n_samples = 0;
  double achieved_fraction = 0.0;
  std::string created_at;

  /// Throws ValidationError naming the bad field.
  void validate() const;

  friend bool operator==(const CalibrationProfile&, const CalibrationProfile&) = default;
};

std::string format_profile(const CalibrationProfile& profile);
CalibrationProfile parse_profile(std::string_view text);
void save_profile(const CalibrationProfile& profile, const std::filesystem::path& path);
CalibrationProfile load_profile(const std::filesystem::path& path);

struct ImageFailure {
  std::string source_id;
  std::string message;
};

struct IndicatorCollection {
  std::vector<IndicatorSample> samples;
  std::vector<ImageFailure> failures;
};

/// One indicator per decodable image, in input order. Images that fail to
/// decode or produce a non-finite indicator are listed in `failures`.
/// ConfigError on empty input; InputError when no image succeeds.
IndicatorCollection collect_clean_indicators(std::span<const std::filesystem::path> image_paths,
                                             const WeightBundle& bundle, std::string_view layer, Tap tap,
                                             std::size_t jobs = 1);

}  // namespace patchguard
