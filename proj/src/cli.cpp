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

#include "patchguard/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <ostream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "patchguard/attention.hpp"
#include "patchguard/bundle.hpp"
#include "patchguard/calibration.hpp"
#include "patchguard/dataset.hpp"
#include "patchguard/detector.hpp"
#include "patchguard/error.hpp"
#include "patchguard/eval.hpp"
#include "patchguard/fileio.hpp"
#include "patchguard/image.hpp"
#include "patchguard/parallel.hpp"

namespace patchguard::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kWeightsEnv = "PATCHGUARD_WEIGHTS";

std::string shortest(float v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string default_created_at() {
  std::time_t epoch = 0;
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
    long long parsed = 0;
    const std::string_view text(sde);
    if (std::from_chars(text.data(), text.data() + text.size(), parsed).ec == std::errc{}) {
      epoch = static_cast<std::time_t>(parsed);
    }
  }
  std::tm tm{};
  gmtime_r(&epoch, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

PatchContent parse_patch_content(const std::string& text) {
  if (text == "noise") return HighContrastNoise{};
  if (text.rfind("file:", 0) == 0 && text.size() > 5) return FilePatch{text.substr(5)};
  if (text.rfind("solid:", 0) == 0) {
    SolidColor solid;
    std::stringstream ss(text.substr(6));
    std::string part;
    std::size_t c = 0;
    while (std::getline(ss, part, ',')) {
      unsigned v = 0;
      const auto [end, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
      if (c >= 3 || ec != std::errc{} || end != part.data() + part.size() || v > 255) {
        throw ConfigError("--patch solid expects solid:R,G,B with components in 0..255");
      }
      solid.rgb[c++] = static_cast<std::uint8_t>(v);
    }
    if (c != 3) throw ConfigError("--patch solid expects solid:R,G,B");
    return solid;
  }
  throw ConfigError("--patch must be noise, solid:R,G,B or file:PATH");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<Image> read_all(const std::vector<fs::path>& paths, std::size_t jobs) {
  std::vector<Image> images(paths.size());
  parallel_for(paths.size(), jobs, [&](std::size_t i) { images[i] = read_image(paths[i]); });
  return images;
}

json metrics_json(const ConfusionMetrics& m) {
  return json{{"tp", m.tp},
              {"fp", m.fp},
              {"tn", m.tn},
              {"fn", m.fn},
              {"n_total", m.n_total},
              {"precision", m.precision},
              {"recall", m.recall},
              {"fscore", m.fscore},
              {"precision_degenerate", m.precision_degenerate},
              {"recall_degenerate", m.recall_degenerate}};
}

// --- subcommands -------------------------------------------------------------

struct CalibrateArgs {
  std::string weights;
  std::string layer;
  std::string tap = "post";
  float p = kDefaultConfidence;
  std::string images;
  std::string out;
  std::size_t jobs = default_jobs();
  std::string created_at;
};

int run_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  const Tap tap = parse_tap(a.tap);
  const WeightBundle bundle = load_bundle(a.weights);
  const auto paths = list_images(a.images);
  const auto collected = collect_clean_indicators(paths, bundle, a.layer, tap, a.jobs);
  for (const auto& f : collected.failures) err << "warning: skipped " << f.source_id << ": " << f.message << "\n";

  const ThresholdEstimate estimate = calibrate(collected.samples, a.p);
  CalibrationProfile profile;
  profile.model_name = bundle.model_name;
  profile.layer = bundle.layer_names[resolve_conv_layer(bundle, a.layer)];
  profile.tap = tap;
  profile.confidence_p = a.p;
  profile.theta = estimate.theta;
  profile.n_samples = estimate.n_samples;
  profile.achieved_fraction = estimate.achieved_fraction;
  profile.created_at = a.created_at.empty() ? default_created_at() : a.created_at;
  save_profile(profile, a.out);

  out << json{{"profile", a.out},
              {"layer", profile.layer},
              {"tap", tap_name(tap)},
              {"theta", profile.theta},
              {"n_samples", profile.n_samples},
              {"achieved_fraction", profile.achieved_fraction},
              {"skipped", collected.failures.size()}}
             .dump()
      << "\n";
  return kExitOk;
}

struct DetectArgs {
  std::string weights;
  std::string profile;
  bool json_lines = false;
  std::size_t jobs = default_jobs();
  std::vector<std::string> images;
};

int run_detect(const DetectArgs& a, std::ostream& out, std::ostream& err) {
  const WeightBundle bundle = load_bundle(a.weights);
  const Detector detector(bundle, load_profile(a.profile));
  std::vector<BatchInput> inputs;
  for (const auto& p : a.images) inputs.push_back(BatchInput{p, p});
  const auto items = detect_batch(inputs, detector, a.jobs);

  bool any_perturbed = false;
  bool any_error = false;
  for (const auto& item : items) {
    if (!item.ok()) {
      any_error = true;
      err << "error: " << item.source_id << ": " << item.error << "\n";
      if (a.json_lines) out << json{{"source_id", item.source_id}, {"error", item.error}}.dump() << "\n";
      continue;
    }
    const DetectionResult& r = *item.result;
    any_perturbed |= r.verdict == Verdict::Perturbed;
    if (a.json_lines) {
      out << "{\"source_id\":" << json(r.source_id).dump() << ",\"verdict\":\"" << verdict_name(r.verdict)
          << "\",\"indicator\":" << shortest(r.indicator) << ",\"theta\":" << shortest(r.theta)
          << ",\"margin\":" << shortest(r.margin) << ",\"layer\":" << json(r.layer).dump() << "}\n";
    } else {
      out << r.source_id << '\t' << verdict_name(r.verdict) << '\t' << shortest(r.indicator) << '\t'
          << shortest(r.theta) << '\t' << shortest(r.margin) << '\n';
    }
  }
  if (any_perturbed) return kExitPerturbed;
  return any_error ? kExitError : kExitOk;
}

struct EvalArgs {
  std::string weights;
  std::string profile;
  std::string manifest;
  std::string report;
  std::size_t jobs = default_jobs();
};

int run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const WeightBundle bundle = load_bundle(a.weights);
  const Detector detector(bundle, load_profile(a.profile));
  const auto records = load_manifest(a.manifest);
  if (records.empty()) throw ConfigError("manifest " + a.manifest + " has no records");
  const fs::path base = fs::path(a.manifest).parent_path();

  std::vector<BatchInput> inputs;
  for (const auto& r : records) inputs.push_back(BatchInput{r.sample.source_id, base / r.sample.source_id});
  const auto items = detect_batch(inputs, detector, a.jobs);

  std::vector<DetectionResult> results;
  std::vector<LabeledSample> labels;
  json failures = json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].ok()) {
      err << "error: " << items[i].source_id << ": " << items[i].error << "\n";
      failures.push_back(json{{"source_id", items[i].source_id}, {"error", items[i].error}});
      continue;
    }
    results.push_back(*items[i].result);
    labels.push_back(records[i].sample);
  }
  const EvalReport report = score(results, labels);

  json per_source = json::object();
  for (const auto& [source, m] : report.per_source) per_source[source] = metrics_json(m);
  json doc = metrics_json(report.overall);
  doc["model_name"] = bundle.model_name;
  doc["layer"] = detector.profile().layer;
  doc["tap"] = tap_name(detector.profile().tap);
  doc["theta"] = detector.profile().theta;
  doc["confidence_p"] = detector.profile().confidence_p;
  doc["per_source"] = per_source;
  doc["failures"] = failures;
  write_file_atomic(a.report, doc.dump(2) + "\n");

  out << metrics_json(report.overall).dump() << "\n";
  return failures.empty() ? kExitOk : kExitError;
}

struct LayerScanArgs {
  std::string weights;
  std::string clean;
  std::string perturbed;
  std::string layers;
  std::string tap = "post";
  std::string out;
  std::size_t jobs = default_jobs();
};

int run_layer_scan(const LayerScanArgs& a, std::ostream& out, std::ostream&) {
  const Tap tap = parse_tap(a.tap);
  const auto layers = split_list(a.layers);
  if (layers.empty()) throw ConfigError("--layers needs at least one layer name");
  const WeightBundle bundle = load_bundle(a.weights);
  for (const auto& l : layers) activation_index(bundle, resolve_conv_layer(bundle, l), tap);

  const auto clean = read_all(list_images(a.clean), a.jobs);
  const auto perturbed = read_all(list_images(a.perturbed), a.jobs);
  const LayerScanReport report = layer_scan(clean, perturbed, bundle, layers, tap, a.jobs);
  export_histogram(report, a.out);

  json summary{{"tap", tap_name(tap)}, {"histogram", a.out}, {"layers", json::array()}};
  for (const auto& e : report.layers) {
    summary["layers"].push_back(json{{"layer", e.layer},
                                     {"overlap", e.overlap},
                                     {"bins", e.histogram.bins()},
                                     {"n_clean", e.clean.size()},
                                     {"n_perturbed", e.perturbed.size()}});
  }
  summary["recommended"] = recommend_layer(report);
  out << summary.dump() << "\n";
  return kExitOk;
}

struct MakeTestsetArgs {
  std::string images;
  std::string patch = "noise";
  double area = kDefaultPatchArea;
  std::size_t side = 0;
  std::uint64_t seed = 0;
  std::string out;
  double analysis_fraction = 0.4;
  std::string stratify_sep;
  std::size_t jobs = default_jobs();
};

int run_make_testset(const MakeTestsetArgs& a, std::ostream& out, std::ostream&) {
  PatchSpec spec;
  spec.content = parse_patch_content(a.patch);
  spec.area_fraction = a.area;
  if (a.side > 0) spec.side_override = a.side;

  const fs::path out_dir(a.out);
  std::error_code ec;
  if (fs::exists(out_dir, ec) && !fs::is_empty(out_dir, ec)) {
    throw ConfigError("output directory " + out_dir.string() + " exists and is not empty");
  }

  const auto paths = list_images(a.images);
  if (paths.empty()) throw ConfigError("no images found in " + a.images);
  std::vector<std::string> names;
  std::vector<std::string> classes;
  for (const auto& p : paths) {
    names.push_back(p.filename().string());
    if (!a.stratify_sep.empty()) classes.push_back(names.back().substr(0, names.back().find(a.stratify_sep)));
  }

  SplitSpec split_spec;
  split_spec.seed = a.seed;
  split_spec.analysis_fraction = a.analysis_fraction;
  split_spec.test_fraction = 1.0 - a.analysis_fraction;
  if (!a.stratify_sep.empty()) split_spec.stratify_key = classes;
  const Split parts = split(names, split_spec);

  auto source_of = [&](const std::string& name) { return fs::path(a.images) / name; };
  std::vector<std::string> test_ids;
  std::vector<fs::path> test_sources;
  for (const auto& name : parts.test) {
    test_ids.push_back(fs::path(name).stem().string() + ".png");
    test_sources.push_back(source_of(name));
  }
  const auto samples = build_balanced_testset(test_ids, spec, a.seed);

  // Build everything in a sibling staging directory, then move it into place.
  fs::path staging = out_dir;
  staging += ".staging-" + std::to_string(::getpid());
  fs::remove_all(staging, ec);
  try {
    fs::create_directories(staging / "analysis");
    for (const auto& name : parts.analysis) write_file_atomic(staging / "analysis" / name, read_file(source_of(name)));
    write_testset(samples, test_sources, staging / "test", a.jobs);
    if (fs::exists(out_dir, ec)) fs::remove(out_dir);
    fs::rename(staging, out_dir);
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }

  std::size_t positives = 0;
  for (const auto& s : samples) positives += s.label == Label::Positive;
  out << json{{"analysis", parts.analysis.size()},
              {"test", parts.test.size()},
              {"positives", positives},
              {"patch_side_at_224", patch_side(spec, 224, 224)},
              {"manifest", (out_dir / "test" / "manifest.tsv").string()}}
             .dump()
      << "\n";
  return kExitOk;
}

struct InspectArgs {
  std::string weights;
  bool json_output = false;
};

int run_inspect(const InspectArgs& a, std::ostream& out, std::ostream&) {
  const WeightBundle bundle = load_bundle(a.weights);
  const Preprocess& pre = bundle.preprocess;
  Shape shape{3, pre.target_height, pre.target_width};

  json layers = json::array();
  std::ostringstream table;
  for (std::size_t i = 0; i < bundle.layers.size(); ++i) {
    shape = layer_output_shape(shape, bundle.layers[i]);
    json entry{{"index", i},
               {"name", bundle.layer_names[i]},
               {"kind", layer_kind_name(bundle.layers[i])},
               {"output_shape", {shape.channels, shape.height, shape.width}}};
    table << i << '\t' << bundle.layer_names[i] << '\t' << layer_kind_name(bundle.layers[i]);
    if (const auto* conv = std::get_if<ConvLayerSpec>(&bundle.layers[i])) {
      entry["in_channels"] = conv->in_channels;
      entry["out_channels"] = conv->out_channels;
      table << '\t' << conv->in_channels << "->" << conv->out_channels;
    } else {
      table << "\t-";
    }
    table << '\t' << shape.channels << 'x' << shape.height << 'x' << shape.width << '\n';
    layers.push_back(entry);
  }

  if (a.json_output) {
    out << json{{"model_name", bundle.model_name},
                {"preprocess",
                 {{"target_size", {pre.target_height, pre.target_width}},
                  {"scale", pre.scale},
                  {"channel_mean", pre.channel_mean},
                  {"channel_std", pre.channel_std},
                  {"channel_order", pre.channel_order == ChannelOrder::RGB ? "RGB" : "BGR"}}},
                {"layers", layers}}
               .dump()
        << "\n";
  } else {
    out << "model\t" << bundle.model_name << "\n"
        << "input\t3x" << pre.target_height << 'x' << pre.target_width << ' '
        << (pre.channel_order == ChannelOrder::RGB ? "RGB" : "BGR") << "\n"
        << table.str();
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention-based adversarial patch detector for shallow CNN prefixes", "patchguard"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  auto add_weights = [](CLI::App* sub, std::string& target) {
    sub->add_option("--weights", target, "PGWB weight bundle")->envname(kWeightsEnv)->required();
  };
  auto add_jobs = [](CLI::App* sub, std::size_t& target) {
    sub->add_option("--jobs", target, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  };
  const auto tap_check = CLI::IsMember({"pre", "post"});
  const CLI::Validator open_unit(
      [](std::string& s) {
        double v = 0.0;
        const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || end != s.data() + s.size() || !(v > 0.0 && v < 1.0)) {
          return std::string("must be a number strictly between 0 and 1");
        }
        return std::string{};
      },
      "(0,1)");

  CalibrateArgs cal;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "Compute the detection threshold from clean images");
  add_weights(calibrate_cmd, cal.weights);
  calibrate_cmd->add_option("--layer", cal.layer, "Detection conv layer (name or index)")->required();
  calibrate_cmd->add_option("--tap", cal.tap, "Read the conv output (pre) or its ReLU (post)")
      ->check(tap_check)
      ->capture_default_str();
  calibrate_cmd->add_option("--p", cal.p, "Confidence level in (0, 1]")
      ->check(CLI::Range(std::nextafter(0.0f, 1.0f), 1.0f))
      ->capture_default_str();
  calibrate_cmd->add_option("--images", cal.images, "Directory of clean images")->required();
  calibrate_cmd->add_option("--out", cal.out, "Profile file to write")->required();
  calibrate_cmd->add_option("--created-at", cal.created_at, "Timestamp recorded in the profile");
  add_jobs(calibrate_cmd, cal.jobs);

  DetectArgs det;
  auto* detect_cmd = app.add_subcommand("detect", "Classify images as clean or perturbed");
  add_weights(detect_cmd, det.weights);
  detect_cmd->add_option("--profile", det.profile, "Calibration profile")->required();
  detect_cmd->add_flag("--json", det.json_lines, "Emit JSON lines");
  add_jobs(detect_cmd, det.jobs);
  detect_cmd->add_option("images", det.images, "Images to check")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score the detector on a labelled manifest");
  add_weights(eval_cmd, ev.weights);
  eval_cmd->add_option("--profile", ev.profile, "Calibration profile")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "manifest.tsv from make-testset")->required();
  eval_cmd->add_option("--report", ev.report, "JSON report to write")->required();
  add_jobs(eval_cmd, ev.jobs);

  LayerScanArgs scan;
  auto* scan_cmd = app.add_subcommand("layer-scan", "Compare clean/perturbed indicator histograms per layer");
  add_weights(scan_cmd, scan.weights);
  scan_cmd->add_option("--clean", scan.clean, "Directory of clean images")->required();
  scan_cmd->add_option("--perturbed", scan.perturbed, "Directory of perturbed images")->required();
  scan_cmd->add_option("--layers", scan.layers, "Comma-separated conv layers")->required();
  scan_cmd->add_option("--tap", scan.tap, "pre or post")->check(tap_check)->capture_default_str();
  scan_cmd->add_option("--out", scan.out, "Histogram CSV to write")->required();
  add_jobs(scan_cmd, scan.jobs);

  MakeTestsetArgs mk;
  auto* make_cmd = app.add_subcommand("make-testset", "Split images and build a balanced patched test set");
  make_cmd->add_option("--images", mk.images, "Directory of clean source images")->required();
  make_cmd->add_option("--patch", mk.patch, "noise | solid:R,G,B | file:PATH")->capture_default_str();
  make_cmd->add_option("--area", mk.area, "Patch area as a fraction of the image")
      ->check(open_unit)
      ->capture_default_str();
  make_cmd->add_option("--side", mk.side, "Absolute patch side in pixels (overrides --area)");
  make_cmd->add_option("--seed", mk.seed, "Seed for split, selection and patches")->capture_default_str();
  make_cmd->add_option("--analysis-fraction", mk.analysis_fraction, "Share of images kept for calibration")
      ->check(open_unit)
      ->capture_default_str();
  make_cmd->add_option("--stratify-sep", mk.stratify_sep,
                       "Stratify by the filename prefix before this separator (e.g. _ for ImageNet)");
  make_cmd->add_option("--out", mk.out, "Output directory (must be new or empty)")->required();
  add_jobs(make_cmd, mk.jobs);

  InspectArgs ins;
  auto* inspect_cmd = app.add_subcommand("inspect-weights", "Describe a weight bundle");
  add_weights(inspect_cmd, ins.weights);
  inspect_cmd->add_flag("--json", ins.json_output, "Emit JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*calibrate_cmd) return run_calibrate(cal, out, err);
    if (*detect_cmd) return run_detect(det, out, err);
    if (*eval_cmd) return run_eval(ev, out, err);
    if (*scan_cmd) return run_layer_scan(scan, out, err);
    if (*make_cmd) return run_make_testset(mk, out, err);
    if (*inspect_cmd) return run_inspect(ins, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace patchguard::cli
