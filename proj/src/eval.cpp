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

#include "patchguard/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include "patchguard/error.hpp"
#include "patchguard/fileio.hpp"
#include "patchguard/parallel.hpp"
#include "patchguard/preprocess.hpp"

namespace patchguard {

ConfusionMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  ConfusionMetrics m{tp, fp, tn, fn, tp + fp + tn + fn};
  m.precision_degenerate = tp + fp == 0;
  m.recall_degenerate = tp + fn == 0;
  m.precision = m.precision_degenerate ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = m.recall_degenerate ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double sum = m.precision + m.recall;
  m.fscore = sum == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / sum;
  return m;
}

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > 20) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace

EvalReport score(std::span<const DetectionResult> results, std::span<const LabeledSample> labels) {
  std::unordered_map<std::string_view, const DetectionResult*> by_id;
  std::vector<std::string> duplicates;
  for (const auto& r : results) {
    if (!by_id.emplace(r.source_id, &r).second) duplicates.push_back(r.source_id);
  }
  std::set<std::string_view> labelled;
  for (const auto& l : labels) {
    if (!labelled.insert(l.source_id).second) duplicates.push_back(l.source_id);
  }
  if (!duplicates.empty()) throw ValidationError("source_id", "duplicate ids: " + join_ids(duplicates));

  std::vector<std::string> offenders;
  for (const auto& l : labels) {
    if (!by_id.count(l.source_id)) offenders.push_back(l.source_id + " (no result)");
  }
  for (const auto& r : results) {
    if (!labelled.count(r.source_id)) offenders.push_back(r.source_id + " (no label)");
  }
  if (!offenders.empty()) throw ValidationError("source_id", "results and labels disagree: " + join_ids(offenders));

  struct Counts {
    std::size_t tp = 0, fn = 0;
  };
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::map<std::string, Counts> sources;
  for (const auto& l : labels) {
    const bool flagged = by_id.at(l.source_id)->verdict == Verdict::Perturbed;
    if (l.label == Label::Positive) {
      auto& c = sources[l.provenance ? attack_source(l.provenance->content) : std::string("unknown")];
      (flagged ? tp : fn)++;
      (flagged ? c.tp : c.fn)++;
    } else {
      (flagged ? fp : tn)++;
    }
  }

  EvalReport report;
  report.overall = metrics_from_counts(tp, fp, tn, fn);
  for (const auto& [source, c] : sources) report.per_source[source] = metrics_from_counts(c.tp, fp, tn, c.fn);
  return report;
}

// --- layer scan -------------------------------------------------------------

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

}  // namespace

std::size_t histogram_bins(std::span<const float> pooled) {
  if (pooled.size() < 2) return kMinHistogramBins;
  std::vector<double> sorted(pooled.begin(), pooled.end());
  std::sort(sorted.begin(), sorted.end());
  const double range = sorted.back() - sorted.front();
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double width = 2.0 * iqr / std::cbrt(static_cast<double>(sorted.size()));
  if (!(width > 0.0) || !(range > 0.0)) return kMinHistogramBins;
  const double bins = std::ceil(range / width);
  return static_cast<std::size_t>(
      std::clamp(bins, static_cast<double>(kMinHistogramBins), static_cast<double>(kMaxHistogramBins)));
}

LayerScanEntry compare_populations(std::string layer, std::size_t layer_index, std::vector<float> clean,
                                   std::vector<float> perturbed) {
  if (clean.empty() || perturbed.empty()) throw ConfigError("layer scan needs both clean and perturbed samples");
  LayerScanEntry entry{std::move(layer), layer_index, std::move(clean), std::move(perturbed), {}, 0.0};

  std::vector<float> pooled = entry.clean;
  pooled.insert(pooled.end(), entry.perturbed.begin(), entry.perturbed.end());
  const auto [min_it, max_it] = std::minmax_element(pooled.begin(), pooled.end());
  LayerHistogram& h = entry.histogram;
  h.lo = *min_it;
  h.hi = *max_it;
  if (h.hi == h.lo) {
    h.lo -= 0.5;
    h.hi += 0.5;
  }
  const std::size_t bins = histogram_bins(pooled);
  h.clean_counts.assign(bins, 0);
  h.perturbed_counts.assign(bins, 0);
  auto bin_of = [&](float v) {
    const double t = (static_cast<double>(v) - h.lo) / (h.hi - h.lo) * static_cast<double>(bins);
    return std::min(static_cast<std::size_t>(std::max(t, 0.0)), bins - 1);
  };
  for (float v : entry.clean) ++h.clean_counts[bin_of(v)];
  for (float v : entry.perturbed) ++h.perturbed_counts[bin_of(v)];

  const auto nc = static_cast<double>(entry.clean.size());
  const auto np = static_cast<double>(entry.perturbed.size());
  for (std::size_t b = 0; b < bins; ++b) {
    entry.overlap += std::min(static_cast<double>(h.clean_counts[b]) / nc, static_cast<double>(h.perturbed_counts[b]) / np);
  }
  entry.overlap = std::min(entry.overlap, 1.0);
  return entry;
}

LayerScanReport layer_scan(std::span<const Image> clean, std::span<const Image> perturbed, const WeightBundle& bundle,
                           std::span<const std::string> layers, Tap tap, std::size_t jobs) {
  if (clean.empty() || perturbed.empty()) throw ConfigError("layer scan needs non-empty clean and perturbed sets");
  if (layers.empty()) throw ConfigError("layer scan needs at least one layer");

  std::vector<std::size_t> conv_indices;
  std::vector<std::size_t> taps;
  for (const auto& name : layers) {
    conv_indices.push_back(resolve_conv_layer(bundle, name));
    taps.push_back(activation_index(bundle, conv_indices.back(), tap));
  }

  auto indicators = [&](std::span<const Image> images) {
    // values[image][layer]
    std::vector<std::vector<float>> values(images.size());
    parallel_for(images.size(), jobs, [&](std::size_t i) {
      const auto activations = forward_taps(preprocess_image(images[i], bundle.preprocess), bundle.layers, taps);
      for (const auto& a : activations) values[i].push_back(indicator_ir(attention_map(a)).value);
    });
    return values;
  };
  const auto clean_values = indicators(clean);
  const auto perturbed_values = indicators(perturbed);

  LayerScanReport report{tap, {}};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<float> c, p;
    for (const auto& v : clean_values) c.push_back(v[l]);
    for (const auto& v : perturbed_values) p.push_back(v[l]);
    report.layers.push_back(
        compare_populations(bundle.layer_names[conv_indices[l]], conv_indices[l], std::move(c), std::move(p)));
  }
  return report;
}

std::string recommend_layer(const LayerScanReport& report) {
  if (report.layers.empty()) throw ConfigError("cannot recommend a layer from an empty scan");
  const auto best = std::min_element(report.layers.begin(), report.layers.end(), [](const auto& a, const auto& b) {
    if (a.overlap != b.overlap) return a.overlap < b.overlap;
    return a.layer_index < b.layer_index;
  });
  return best->layer;
}

namespace {

std::string number(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

std::string format_histogram_csv(const LayerScanReport& report) {
  std::ostringstream out;
  out << "layer,bin_lo,bin_hi,clean_count,perturbed_count\n";
  for (const auto& entry : report.layers) {
    const auto& h = entry.histogram;
    for (std::size_t b = 0; b < h.bins(); ++b) {
      out << entry.layer << ',' << number(h.bin_lo(b)) << ',' << number(h.bin_hi(b)) << ',' << h.clean_counts[b]
          << ',' << h.perturbed_counts[b] << '\n';
    }
  }
  return out.str();
}

void export_histogram(const LayerScanReport& report, const std::filesystem::path& path) {
  write_file_atomic(path, format_histogram_csv(report));
}

}  // namespace patchguard
