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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "patchguard/attention.hpp"
#include "patchguard/bundle.hpp"
#include "patchguard/dataset.hpp"
#include "patchguard/detector.hpp"
#include "patchguard/image.hpp"

namespace patchguard {

/// Confusion counts with Positive = Perturbed, and the derived metrics.
/// Metrics with a zero denominator are 0 and flagged rather than NaN.
struct ConfusionMetrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::size_t n_total = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
  bool precision_degenerate = false;
  bool recall_degenerate = false;

  double false_positive_rate() const { return fp + tn == 0 ? 0.0 : static_cast<double>(fp) / (fp + tn); }
};

ConfusionMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

struct EvalReport {
  ConfusionMetrics overall;
  /// Keyed by attack source. Each entry scores that source's positives
  /// against all negatives, so every source gets a balanced P/R/F.
  std::map<std::string, ConfusionMetrics> per_source;
};

/// Aligns results and labels by source_id. ValidationError listing the
/// offending ids if either side has duplicates or ids missing from the other.
EvalReport score(std::span<const DetectionResult> results, std::span<const LabeledSample> labels);

struct LayerHistogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> clean_counts;
  std::vector<std::size_t> perturbed_counts;

  std::size_t bins() const { return clean_counts.size(); }
  double bin_lo(std::size_t i) const { return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins()); }
  double bin_hi(std::size_t i) const { return i + 1 == bins() ? hi : bin_lo(i + 1); }
};

struct LayerScanEntry {
  std::string layer;
  std::size_t layer_index = 0;
  std::vector<float> clean;
  std::vector<float> perturbed;
  LayerHistogram histogram;
  /// Sum over bins of min(clean frequency, perturbed frequency); 0 means the
  /// populations never share a bin, 1 means identical histograms.
  double overlap = 0.0;
};

struct LayerScanReport {
  Tap tap = Tap::Post;
  std::vector<LayerScanEntry> layers;
};

inline constexpr std::size_t kMinHistogramBins = 16;
inline constexpr std::size_t kMaxHistogramBins = 256;

/// Freedman-Diaconis bin count on the pooled sample, clamped to [16, 256].
std::size_t histogram_bins(std::span<const float> pooled);

/// Shared-binning histogram and overlap coefficient for two populations.
LayerScanEntry compare_populations(std::string layer, std::size_t layer_index, std::vector<float> clean,
                                   std::vector<float> perturbed);

/// Indicator populations at every requested conv layer, one forward pass per
/// image. ConfigError on an empty image set or unknown layer.
LayerScanReport layer_scan(std::span<const Image> clean, std::span<const Image> perturbed, const WeightBundle& bundle,
                           std::span<const std::string> layers, Tap tap = Tap::Post, std::size_t jobs = 1);

/// Layer with minimum overlap; ties go to the shallowest layer.
std::string recommend_layer(const LayerScanReport& report);

/// CSV rows: layer,bin_lo,bin_hi,clean_count,perturbed_count, one per bin.
std::string format_histogram_csv(const LayerScanReport& report);
void export_histogram(const LayerScanReport& report, const std::filesystem::path& path);

}  // namespace patchguard
