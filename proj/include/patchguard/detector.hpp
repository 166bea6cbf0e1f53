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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patchguard/attention.hpp"
#include "patchguard/bundle.hpp"
#include "patchguard/calibration.hpp"
#include "patchguard/image.hpp"

namespace patchguard {

enum class Verdict { Clean, Perturbed };

std::string_view verdict_name(Verdict verdict);

/// Perturbed iff indicator > theta. Equality is clean.
inline Verdict decide(float indicator, float theta) {
  return indicator > theta ? Verdict::Perturbed : Verdict::Clean;
}

struct DetectionResult {
  Verdict verdict = Verdict::Clean;
  float indicator = 0.0f;
  float theta = 0.0f;
  /// indicator - theta; positive exactly when the verdict is Perturbed.
  float margin = 0.0f;
  std::string layer;
  std::string source_id;

  friend bool operator==(const DetectionResult&, const DetectionResult&) = default;
};

/// Bundle + profile pair checked for consistency once. Holds a reference to
/// the bundle, which must outlive the detector.
class Detector {
 public:
  /// ConfigError if the profile was calibrated for another model or names a
  /// layer/tap the bundle cannot provide.
  Detector(const WeightBundle& bundle, CalibrationProfile profile);

  DetectionResult detect(const Image& image, std::string source_id = {}) const;
  DetectionResult detect_preprocessed(const Tensor& input, std::string source_id = {}) const;

  const CalibrationProfile& profile() const { return profile_; }
  const WeightBundle& bundle() const { return bundle_; }

 private:
  const WeightBundle& bundle_;
  CalibrationProfile profile_;
  std::size_t activation_index_;
};

DetectionResult detect(const Image& image, const WeightBundle& bundle, const CalibrationProfile& profile,
                       std::string source_id = {});

struct BatchInput {
  std::string source_id;
  std::filesystem::path path;
};

/// One entry per input. Exactly one of `result` / `error` is meaningful.
struct BatchItem {
  std::string source_id;
  std::optional<DetectionResult> result;
  std::string error;

  bool ok() const { return result.has_value(); }
};

/// Runs detection on `jobs` workers. Output order always matches input order.
/// Per-image failures become error entries; InputError only if every image
/// fails.
std::vector<BatchItem> detect_batch(std::span<const BatchInput> inputs, const Detector& detector, std::size_t jobs);
std::vector<BatchItem> detect_batch(std::span<const std::filesystem::path> paths, const WeightBundle& bundle,
                                    const CalibrationProfile& profile, std::size_t jobs);

}  // namespace patchguard
