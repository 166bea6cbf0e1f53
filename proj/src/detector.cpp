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

#include "patchguard/detector.hpp"

#include <map>

#include "patchguard/error.hpp"
#include "patchguard/parallel.hpp"
#include "patchguard/preprocess.hpp"

namespace patchguard {

std::string_view verdict_name(Verdict verdict) { return verdict == Verdict::Perturbed ? "perturbed" : "clean"; }

namespace {

std::size_t checked_activation_index(const WeightBundle& bundle, const CalibrationProfile& profile) {
  if (profile.model_name != bundle.model_name) {
    throw ConfigError("profile was calibrated for model '" + profile.model_name + "' but the weights are '" +
                      bundle.model_name + "'");
  }
  profile.validate();
  return activation_index(bundle, resolve_conv_layer(bundle, profile.layer), profile.tap);
}

}  // namespace

Detector::Detector(const WeightBundle& bundle, CalibrationProfile profile)
    : bundle_(bundle), profile_(std::move(profile)), activation_index_(checked_activation_index(bundle_, profile_)) {}

DetectionResult Detector::detect_preprocessed(const Tensor& input, std::string source_id) const {
  const float indicator = indicator_at_index(input, bundle_, activation_index_).value;
  return DetectionResult{decide(indicator, profile_.theta), indicator, profile_.theta, indicator - profile_.theta,
                         profile_.layer, std::move(source_id)};
}

DetectionResult Detector::detect(const Image& image, std::string source_id) const {
  return detect_preprocessed(preprocess_image(image, bundle_.preprocess), std::move(source_id));
}

DetectionResult detect(const Image& image, const WeightBundle& bundle, const CalibrationProfile& profile,
                       std::string source_id) {
  return Detector(bundle, profile).detect(image, std::move(source_id));
}

std::vector<BatchItem> detect_batch(std::span<const BatchInput> inputs, const Detector& detector, std::size_t jobs) {
  if (jobs < 1) throw ConfigError("parallelism must be at least 1");
  if (inputs.empty()) throw ConfigError("no images to detect");

  std::vector<BatchItem> items(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) {
    items[i].source_id = inputs[i].source_id;
    try {
      items[i].result = detector.detect(read_image(inputs[i].path), inputs[i].source_id);
    } catch (const Error& e) {
      items[i].error = e.what();
    }
  });

  if (std::none_of(items.begin(), items.end(), [](const BatchItem& item) { return item.ok(); })) {
    std::map<std::string, std::size_t> causes;
    for (const auto& item : items) ++causes[item.error];
    std::string summary = "all " + std::to_string(items.size()) + " images failed:";
    for (const auto& [cause, count] : causes) summary += " [" + std::to_string(count) + "x] " + cause + ";";
    throw InputError(summary);
  }
  return items;
}

std::vector<BatchItem> detect_batch(std::span<const std::filesystem::path> paths, const WeightBundle& bundle,
                                    const CalibrationProfile& profile, std::size_t jobs) {
  std::vector<BatchInput> inputs;
  inputs.reserve(paths.size());
  for (const auto& p : paths) inputs.push_back(BatchInput{p.string(), p});
  return detect_batch(inputs, Detector(bundle, profile), jobs);
}

}  // namespace patchguard
