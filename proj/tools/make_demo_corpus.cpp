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

// Writes a crafted smoothing bundle and a directory of synthetic clean scenes,
// enough to exercise every patchguard subcommand without real weights.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "patchguard/bundle.hpp"
#include "patchguard/error.hpp"
#include "patchguard/image.hpp"
#include "patchguard/synthetic.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  CLI::App app{"Generate a toy weight bundle and synthetic clean images"};
  std::string out;
  std::size_t count = 200;
  std::size_t size = 64;
  std::size_t depth = 3;
  std::uint64_t seed = 1;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--count", count, "Number of images")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--size", size, "Image side in pixels")->check(CLI::Range(4, 4096))->capture_default_str();
  app.add_option("--depth", depth, "Number of conv+ReLU blocks")->check(CLI::Range(1, 16))->capture_default_str();
  app.add_option("--seed", seed, "Generator seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path dir(out);
    fs::create_directories(dir / "images");
    const auto bundle = patchguard::synthetic::smoothing_bundle(depth, 8, seed, patchguard::synthetic::unit_preprocess(size));
    patchguard::save_bundle(bundle, dir / "toy.pgwb");
    for (std::size_t i = 0; i < count; ++i) {
      const std::string name = "scene_" + std::to_string(100000 + i).substr(1) + ".png";
      patchguard::write_image(patchguard::synthetic::scene(seed * 1000003 + i, size, size), dir / "images" / name);
    }
    std::cout << "wrote " << (dir / "toy.pgwb").string() << " and " << count << " images\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
