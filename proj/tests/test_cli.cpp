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

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "patchguard/calibration.hpp"
#include "patchguard/cli.hpp"
#include "patchguard/dataset.hpp"
#include "patchguard/fileio.hpp"
#include "patchguard/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace patchguard;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "patchguard");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

/// Weights plus 30 synthetic scenes, shared by the workflow tests.
struct Workspace {
  fixtures::TempDir dir;
  std::filesystem::path weights = dir / "toy.pgwb";
  std::filesystem::path images = dir / "images";

  Workspace() {
    save_bundle(synthetic::smoothing_bundle(2, 4, 1, synthetic::unit_preprocess(32)), weights);
    std::filesystem::create_directories(images);
    for (int i = 0; i < 30; ++i) {
      write_image(synthetic::scene(static_cast<std::uint64_t>(i), 32, 32),
                  images / ("scene_" + std::to_string(100 + i) + ".png"));
    }
  }
};

}  // namespace

TEST_CASE("usage handling") {
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
  CHECK(run_cli({"calibrate", "--help"}).code == cli::kExitOk);
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);
  const Outcome bad_p =
      run_cli({"calibrate", "--weights", "w", "--layer", "conv1", "--p", "1.5", "--images", "d", "--out", "o"});
  CHECK(bad_p.code == cli::kExitUsage);
  CHECK_FALSE(bad_p.err.empty());
  CHECK(run_cli({"calibrate", "--weights", "w", "--layer", "conv1", "--p", "abc", "--images", "d", "--out", "o"})
            .code == cli::kExitUsage);
  CHECK(run_cli({"layer-scan", "--weights", "w", "--clean", "a", "--perturbed", "b", "--layers", "conv1", "--tap",
                 "middle", "--out", "x"})
            .code == cli::kExitUsage);
}

TEST_CASE("inspect-weights") {
  Workspace ws;
  const Outcome r = run_cli({"inspect-weights", "--weights", ws.weights.string(), "--json"});
  REQUIRE(r.code == cli::kExitOk);
  const json doc = json::parse(r.out);
  CHECK(doc["model_name"] == "smooth-toy");
  REQUIRE(doc["layers"].size() == 4);
  CHECK(doc["layers"][0]["name"] == "conv1");
  CHECK(doc["layers"][0]["output_shape"] == json::array({4, 32, 32}));

  const Outcome table = run_cli({"inspect-weights", "--weights", ws.weights.string()});
  CHECK(table.code == cli::kExitOk);
  CHECK(table.out.find("relu2") != std::string::npos);

  CHECK(run_cli({"inspect-weights", "--weights", (ws.dir / "missing.pgwb").string()}).code == cli::kExitError);
}

TEST_CASE("calibrate, detect, eval and layer-scan end to end") {
  Workspace ws;
  const auto set = ws.dir / "set";
  const Outcome made = run_cli({"make-testset", "--images", ws.images.string(), "--out", set.string(), "--seed", "4",
                                "--patch", "noise", "--area", "0.1"});
  REQUIRE(made.code == cli::kExitOk);
  const json summary = json::parse(made.out);
  CHECK(summary["analysis"] == 12);
  CHECK(summary["test"] == 18);
  CHECK(summary["positives"] == 9);
  CHECK(std::filesystem::exists(set / "test" / "manifest.tsv"));
  CHECK(list_images(set / "analysis").size() == 12);
  CHECK(list_images(set / "test").size() == 18);

  // Same seed, same bytes.
  const auto again = ws.dir / "set2";
  REQUIRE(run_cli({"make-testset", "--images", ws.images.string(), "--out", again.string(), "--seed", "4", "--patch",
                   "noise", "--area", "0.1"})
              .code == cli::kExitOk);
  CHECK(read_file(set / "test" / "manifest.tsv") == read_file(again / "test" / "manifest.tsv"));

  const auto profile_path = ws.dir / "profile.txt";
  const Outcome cal = run_cli({"calibrate", "--weights", ws.weights.string(), "--layer", "conv1", "--p", "0.95",
                               "--images", (set / "analysis").string(), "--out", profile_path.string()});
  REQUIRE(cal.code == cli::kExitOk);
  const CalibrationProfile profile = load_profile(profile_path);
  CHECK(profile.n_samples == 12);
  CHECK(profile.layer == "conv1");
  CHECK(profile.tap == Tap::Post);
  CHECK(profile.created_at == "1970-01-01T00:00:00Z");
  CHECK(json::parse(cal.out)["theta"].get<float>() == profile.theta);

  SUBCASE("detect exit codes follow the verdicts") {
    const auto records = load_manifest(set / "test" / "manifest.tsv");
    std::vector<std::string> args{"detect", "--weights", ws.weights.string(), "--profile", profile_path.string(),
                                  "--json"};
    for (const auto& rec : records) args.push_back((set / "test" / rec.sample.source_id).string());
    const Outcome det = run_cli(args);
    const auto rows = lines(det.out);
    REQUIRE(rows.size() == records.size());
    bool any_perturbed = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const json row = json::parse(rows[i]);
      CHECK(row["source_id"] == (set / "test" / records[i].sample.source_id).string());
      const bool perturbed = row["verdict"] == "perturbed";
      any_perturbed |= perturbed;
      CHECK(perturbed == (row["indicator"].get<float>() > row["theta"].get<float>()));
    }
    CHECK(det.code == (any_perturbed ? cli::kExitPerturbed : cli::kExitOk));

    const auto dark = ws.dir / "dark.png";
    write_image(fixtures::uniform_image(32, 32, 0), dark);
    CHECK(run_cli({"detect", "--weights", ws.weights.string(), "--profile", profile_path.string(), dark.string()})
              .code == cli::kExitOk);

    const auto white = ws.dir / "white.png";
    write_image(fixtures::uniform_image(32, 32, 255), white);
    const Outcome w =
        run_cli({"detect", "--weights", ws.weights.string(), "--profile", profile_path.string(), white.string()});
    CHECK(w.code == cli::kExitPerturbed);
    CHECK(w.out.find("perturbed") != std::string::npos);

    CHECK(run_cli({"detect", "--weights", ws.weights.string(), "--profile", profile_path.string(),
                   (ws.dir / "nope.png").string()})
              .code == cli::kExitError);
  }

  SUBCASE("weights can come from the environment") {
    const auto dark = ws.dir / "dark.png";
    write_image(fixtures::uniform_image(32, 32, 0), dark);
    ::setenv("PATCHGUARD_WEIGHTS", ws.weights.c_str(), 1);
    const Outcome r = run_cli({"detect", "--profile", profile_path.string(), dark.string()});
    ::unsetenv("PATCHGUARD_WEIGHTS");
    CHECK(r.code == cli::kExitOk);
    CHECK(run_cli({"detect", "--profile", profile_path.string(), dark.string()}).code == cli::kExitUsage);
  }

  SUBCASE("eval writes a parseable report") {
    const auto report_path = ws.dir / "report.json";
    const Outcome ev = run_cli({"eval", "--weights", ws.weights.string(), "--profile", profile_path.string(),
                                "--manifest", (set / "test" / "manifest.tsv").string(), "--report",
                                report_path.string(), "--jobs", "3"});
    REQUIRE(ev.code == cli::kExitOk);
    const auto bytes = read_file(report_path);
    const json report = json::parse(std::string(bytes.begin(), bytes.end()));
    CHECK(report["n_total"] == 18);
    CHECK(report["per_source"].contains("noise"));
    CHECK(report["failures"].empty());
    CHECK(json::parse(ev.out)["n_total"] == 18);
  }

  SUBCASE("layer-scan") {
    const auto perturbed = ws.dir / "perturbed";
    std::filesystem::create_directories(perturbed);
    for (const auto& path : list_images(set / "analysis")) {
      PatchSpec spec;
      spec.area_fraction = 0.1;
      spec.content = HighContrastNoise{derive_seed(1, path.filename().string())};
      write_image(apply_patch(read_image(path), spec).image, perturbed / path.filename());
    }
    const auto csv = ws.dir / "hist.csv";
    const Outcome scan = run_cli({"layer-scan", "--weights", ws.weights.string(), "--clean",
                                  (set / "analysis").string(), "--perturbed", perturbed.string(), "--layers",
                                  "conv1,conv2", "--out", csv.string()});
    REQUIRE(scan.code == cli::kExitOk);
    const json doc = json::parse(scan.out);
    CHECK(doc["layers"].size() == 2);
    CHECK(doc.contains("recommended"));
    const auto bytes = read_file(csv);
    CHECK(lines(std::string(bytes.begin(), bytes.end())).front() ==
          "layer,bin_lo,bin_hi,clean_count,perturbed_count");
  }
}

TEST_CASE("failed commands leave no partial output") {
  Workspace ws;

  const auto profile_path = ws.dir / "profile.txt";
  const auto empty = ws.dir / "empty";
  std::filesystem::create_directories(empty);
  const Outcome cal = run_cli({"calibrate", "--weights", ws.weights.string(), "--layer", "conv1", "--images",
                               empty.string(), "--out", profile_path.string()});
  CHECK(cal.code == cli::kExitError);
  CHECK_FALSE(cal.err.empty());
  CHECK_FALSE(std::filesystem::exists(profile_path));

  CHECK(run_cli({"calibrate", "--weights", ws.weights.string(), "--layer", "conv7", "--images", ws.images.string(),
                 "--out", profile_path.string()})
            .code == cli::kExitError);
  CHECK_FALSE(std::filesystem::exists(profile_path));

  const auto occupied = ws.dir / "occupied";
  std::filesystem::create_directories(occupied);
  write_file_atomic(occupied / "keep.txt", std::string_view("mine"));
  CHECK(run_cli({"make-testset", "--images", ws.images.string(), "--out", occupied.string()}).code ==
        cli::kExitError);
  CHECK(std::distance(std::filesystem::directory_iterator(occupied), std::filesystem::directory_iterator{}) == 1);

  const auto fresh = ws.dir / "fresh";
  CHECK(run_cli({"make-testset", "--images", ws.images.string(), "--out", fresh.string(), "--patch",
                 "file:" + (ws.dir / "missing.png").string()})
            .code == cli::kExitError);
  CHECK_FALSE(std::filesystem::exists(fresh));
  for (const auto& entry : std::filesystem::directory_iterator(ws.dir.path()))
    CHECK(entry.path().filename().string().find("staging") == std::string::npos);
}
