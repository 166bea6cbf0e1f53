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

#include "patchguard/golden.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "patchguard/error.hpp"
#include "patchguard/fileio.hpp"

namespace patchguard {

namespace {

using nlohmann::json;

Tensor tensor_from(const json& node, const char* what) {
  const auto& shape = node.at("shape");
  if (!shape.is_array() || shape.size() != 3) throw FormatError(std::string(what) + ".shape must be [C, H, W]");
  const Shape s{shape[0].get<std::size_t>(), shape[1].get<std::size_t>(), shape[2].get<std::size_t>()};
  std::vector<float> data = node.at("data").get<std::vector<float>>();
  if (data.size() != s.size()) {
    throw FormatError(std::string(what) + ": " + std::to_string(data.size()) + " values for shape of size " +
                      std::to_string(s.size()));
  }
  return Tensor(s, std::move(data));
}

json tensor_json(const Tensor& t) {
  const Shape s = t.shape();
  return json{{"shape", {s.channels, s.height, s.width}},
              {"data", std::vector<float>(t.data().begin(), t.data().end())}};
}

}  // namespace

GoldenVector parse_golden(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("golden vector is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kGoldenFormat) throw FormatError("unsupported golden vector format");
    GoldenVector g;
    g.weights = doc.at("weights").get<std::string>();
    g.layer = doc.at("layer").get<std::string>();
    g.input = tensor_from(doc.at("input"), "input");
    g.expected = tensor_from(doc.at("output"), "output");
    return g;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed golden vector: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("malformed golden vector: ") + e.what());
  }
}

GoldenVector load_golden(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  GoldenVector g = parse_golden(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  if (g.weights.is_relative()) g.weights = path.parent_path() / g.weights;
  return g;
}

std::string format_golden(const GoldenVector& golden) {
  const json doc{{"format", kGoldenFormat},
                 {"weights", golden.weights.generic_string()},
                 {"layer", golden.layer},
                 {"input", tensor_json(golden.input)},
                 {"output", tensor_json(golden.expected)}};
  return doc.dump() + "\n";
}

GoldenReplay replay_golden(const GoldenVector& golden, const WeightBundle& bundle) {
  const auto index = bundle.find_layer(golden.layer);
  if (!index) throw ConfigError("golden vector names unknown layer '" + golden.layer + "'");
  const Tensor out = forward_prefix(golden.input, bundle.layers, *index);
  if (!(out.shape() == golden.expected.shape())) throw ShapeError("golden output shape differs from the engine's");
  GoldenReplay r{out.shape(), 0.0f};
  const auto got = out.data();
  const auto want = golden.expected.data();
  for (std::size_t i = 0; i < got.size(); ++i) {
    const float d = std::fabs(got[i] - want[i]);
    if (std::isnan(d)) return {out.shape(), d};
    r.max_abs_diff = std::max(r.max_abs_diff, d);
  }
  return r;
}

}  // namespace patchguard
