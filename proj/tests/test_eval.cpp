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

#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "patchguard/error.hpp"
#include "patchguard/eval.hpp"
#include "patchguard/fileio.hpp"
#include "patchguard/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace patchguard;

namespace {

DetectionResult result(std::string id, Verdict v) {
  DetectionResult r;
  r.source_id = std::move(id);
  r.verdict = v;
  return r;
}

LabeledSample positive(std::string id, PatchContent content = HighContrastNoise{}) {
  PatchSpec spec;
  spec.content = std::move(content);
  return LabeledSample{std::move(id), Label::Positive, spec};
}

LabeledSample negative(std::string id) { return LabeledSample{std::move(id), Label::Negative, std::nullopt}; }

LayerScanReport report_with(const std::vector<double>& overlaps, const std::vector<std::string>& names) {
  LayerScanReport r;
  for (std::size_t i = 0; i < overlaps.size(); ++i) {
    LayerScanEntry e;
    e.layer = names[i];
    e.layer_index = 2 * i;
    e.overlap = overlaps[i];
    r.layers.push_back(e);
  }
  return r;
}

}  // namespace

TEST_CASE("metric arithmetic") {
  const ConfusionMetrics m = metrics_from_counts(100, 5, 0, 0);
  CHECK(std::abs(m.precision - 0.9524) <= 1e-4);
  CHECK(m.recall == 1.0);
  CHECK(std::abs(m.fscore - 0.9756) <= 1e-4);
  CHECK(m.n_total == 105);

  const ConfusionMetrics none = metrics_from_counts(0, 0, 10, 10);
  CHECK(none.precision == 0.0);
  CHECK(none.precision_degenerate);
  CHECK(none.recall == 0.0);
  CHECK_FALSE(none.recall_degenerate);
  CHECK(none.fscore == 0.0);

  const ConfusionMetrics empty = metrics_from_counts(0, 0, 0, 0);
  CHECK(empty.recall_degenerate);
  CHECK(empty.false_positive_rate() == 0.0);
}

TEST_CASE("F-score lies between min(P,R) and max(P,R)") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> d(1, 500);
  for (int i = 0; i < 500; ++i) {
    const ConfusionMetrics m = metrics_from_counts(d(rng), d(rng), d(rng), d(rng));
    CHECK(m.fscore >= std::min(m.precision, m.recall) - 1e-12);
    CHECK(m.fscore <= std::max(m.precision, m.recall) + 1e-12);
  }
}

TEST_CASE("score aligns by id and splits by attack source") {
  const std::vector<LabeledSample> labels{positive("a"), positive("b", SolidColor{{1, 2, 3}}), negative("c"),
                                          negative("d"), positive("e")};

  SUBCASE("perfect detector") {
    const std::vector<DetectionResult> results{result("e", Verdict::Perturbed), result("d", Verdict::Clean),
                                               result("c", Verdict::Clean), result("b", Verdict::Perturbed),
                                               result("a", Verdict::Perturbed)};
    const EvalReport r = score(results, labels);
    CHECK(r.overall.precision == 1.0);
    CHECK(r.overall.recall == 1.0);
    CHECK(r.overall.fscore == 1.0);
    REQUIRE(r.per_source.size() == 2);
    CHECK(r.per_source.at("noise").tp == 2);
    CHECK(r.per_source.at("noise").tn == 2);
    CHECK(r.per_source.at("solid:1,2,3").tp == 1);
  }

  SUBCASE("always clean") {
    std::vector<DetectionResult> results;
    for (const auto& l : labels) results.push_back(result(l.source_id, Verdict::Clean));
    const EvalReport r = score(results, labels);
    CHECK(r.overall.recall == 0.0);
    CHECK(r.overall.precision == 0.0);
    CHECK(r.overall.precision_degenerate);
  }

  SUBCASE("false positives count against every source") {
    const std::vector<DetectionResult> results{result("a", Verdict::Perturbed), result("b", Verdict::Clean),
                                               result("c", Verdict::Perturbed), result("d", Verdict::Clean),
                                               result("e", Verdict::Clean)};
    const EvalReport r = score(results, labels);
    CHECK(r.per_source.at("noise").fp == 1);
    CHECK(r.per_source.at("solid:1,2,3").fp == 1);
    CHECK(r.per_source.at("solid:1,2,3").fn == 1);
    CHECK(r.overall.tp == 1);
    CHECK(r.overall.fn == 2);
  }

  SUBCASE("mismatches are named") {
    const std::vector<DetectionResult> results{result("a", Verdict::Clean), result("zzz", Verdict::Clean)};
    try {
      score(results, labels);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("zzz") != std::string::npos);
    }
    const std::vector<DetectionResult> dup{result("a", Verdict::Clean), result("a", Verdict::Clean)};
    const std::vector<LabeledSample> one{positive("a")};
    CHECK_THROWS_AS(score(dup, one), ValidationError);
  }
}

TEST_CASE("overlap coefficient bounds") {
  std::mt19937_64 rng(8);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> a(300);
  for (auto& v : a) v = n(rng);

  const LayerScanEntry same = compare_populations("conv1", 0, a, a);
  CHECK(same.overlap == doctest::Approx(1.0));
  CHECK(same.histogram.bins() >= kMinHistogramBins);
  CHECK(same.histogram.bins() <= kMaxHistogramBins);

  std::vector<float> shifted = a;
  for (auto& v : shifted) v += 100.0f;
  CHECK(compare_populations("conv1", 0, a, shifted).overlap == 0.0);

  std::vector<float> half = a;
  for (auto& v : half) v += 1.0f;
  const double mid = compare_populations("conv1", 0, a, half).overlap;
  CHECK(mid > 0.0);
  CHECK(mid < 1.0);

  // A constant pooled sample still yields a usable histogram.
  const std::vector<float> flat(10, 2.0f);
  const LayerScanEntry degenerate = compare_populations("conv1", 0, flat, flat);
  CHECK(degenerate.overlap == doctest::Approx(1.0));
  CHECK(degenerate.histogram.lo < 2.0);
  CHECK(degenerate.histogram.hi > 2.0);

  CHECK_THROWS_AS(compare_populations("conv1", 0, {}, a), ConfigError);
}

TEST_CASE("histograms count every sample in the right bin") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<float> u(-3.0f, 7.0f);
  std::vector<float> clean(157), pert(91);
  for (auto& v : clean) v = u(rng);
  for (auto& v : pert) v = u(rng) * 0.5f + 4.0f;
  const LayerScanEntry e = compare_populations("c", 0, clean, pert);
  const LayerHistogram& h = e.histogram;

  auto recount = [&](const std::vector<float>& values) {
    std::vector<std::size_t> counts(h.bins(), 0);
    for (float v : values) {
      for (std::size_t i = 0; i < h.bins(); ++i) {
        const bool last = i + 1 == h.bins();
        if (v >= h.bin_lo(i) && (v < h.bin_hi(i) || (last && v <= h.bin_hi(i)))) {
          ++counts[i];
          break;
        }
      }
    }
    return counts;
  };
  CHECK(recount(clean) == h.clean_counts);
  CHECK(recount(pert) == h.perturbed_counts);

  double manual = 0.0;
  for (std::size_t i = 0; i < h.bins(); ++i)
    manual += std::min(static_cast<double>(h.clean_counts[i]) / clean.size(),
                       static_cast<double>(h.perturbed_counts[i]) / pert.size());
  CHECK(e.overlap == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("a brighter patch separates better at layer 1") {
  const WeightBundle bundle = synthetic::smoothing_bundle(1, 4, 2, synthetic::unit_preprocess(48));
  std::vector<Image> clean, bright, dim;
  for (std::uint64_t i = 0; i < 40; ++i) {
    clean.push_back(synthetic::scene(i, 48, 48));
    PatchSpec spec;
    spec.area_fraction = 0.1;
    spec.placement = UniformRandom{i};
    spec.content = SolidColor{{255, 255, 255}};
    bright.push_back(apply_patch(clean.back(), spec).image);
    spec.content = SolidColor{{128, 128, 128}};
    dim.push_back(apply_patch(clean.back(), spec).image);
  }
  const std::vector<std::string> layers{"conv1"};
  const double strong = layer_scan(clean, bright, bundle, layers).layers[0].overlap;
  const double weak = layer_scan(clean, dim, bundle, layers).layers[0].overlap;
  CHECK(strong < weak);
}

TEST_CASE("layer_scan matches per-image indicators") {
  const WeightBundle bundle = synthetic::smoothing_bundle(3, 4, 9, synthetic::unit_preprocess(24));
  std::vector<Image> clean, pert;
  for (std::uint64_t i = 0; i < 6; ++i) {
    clean.push_back(synthetic::scene(i, 30, 20));
    pert.push_back(synthetic::scene(i + 50, 24, 24));
  }
  const std::vector<std::string> layers{"conv3", "conv1"};
  const LayerScanReport serial = layer_scan(clean, pert, bundle, layers, Tap::Pre, 1);
  const LayerScanReport parallel = layer_scan(clean, pert, bundle, layers, Tap::Pre, 4);
  REQUIRE(serial.layers.size() == 2);
  CHECK(serial.layers[0].layer == "conv3");
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(serial.layers[l].clean == parallel.layers[l].clean);
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const Tensor input = preprocess_image(clean[i], bundle.preprocess);
      CHECK(serial.layers[l].clean[i] == indicator_at_layer(input, bundle, layers[l], Tap::Pre).value);
    }
  }
  const std::vector<std::string> unknown{"conv9"};
  CHECK_THROWS_AS(layer_scan(clean, pert, bundle, unknown), ConfigError);
  CHECK_THROWS_AS(layer_scan({}, pert, bundle, layers), ConfigError);
}

TEST_CASE("recommend_layer") {
  CHECK(recommend_layer(report_with({0.1, 0.1, 0.4}, {"a", "b", "c"})) == "a");
  CHECK(recommend_layer(report_with({0.5, 0.2, 0.4}, {"a", "b", "c"})) == "b");
  CHECK(recommend_layer(report_with({0.5, 0.2, 0.4}, {"x", "y", "z"})) == "y");
  CHECK_THROWS_AS(recommend_layer(LayerScanReport{}), ConfigError);
}

TEST_CASE("histogram CSV") {
  std::vector<float> a{0.0f, 1.0f, 2.0f, 3.0f}, b{10.0f, 11.0f};
  LayerScanReport r;
  r.layers.push_back(compare_populations("conv1", 0, a, b));
  r.layers.push_back(compare_populations("conv2", 2, a, a));
  const std::string csv = format_histogram_csv(r);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "layer,bin_lo,bin_hi,clean_count,perturbed_count");
  std::size_t rows = 0, clean_total = 0;
  while (std::getline(in, line)) {
    ++rows;
    const auto last = line.rfind(',');
    const auto prev = line.rfind(',', last - 1);
    clean_total += std::stoul(line.substr(prev + 1, last - prev - 1));
  }
  CHECK(rows == r.layers[0].histogram.bins() + r.layers[1].histogram.bins());
  CHECK(clean_total == 8);

  fixtures::TempDir dir;
  export_histogram(r, dir / "h.csv");
  const auto bytes = read_file(dir / "h.csv");
  CHECK(std::string(bytes.begin(), bytes.end()) == csv);
}
