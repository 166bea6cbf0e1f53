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

#include "patchguard/calibration.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>

#include "patchguard/error.hpp"
#include "patchguard/fileio.hpp"
#include "patchguard/image.hpp"
#include "patchguard/parallel.hpp"

namespace patchguard {

ThresholdEstimate calibrate(std::span<const IndicatorSample> samples, float p) {
  if (samples.empty()) throw ConfigError("calibration needs at least one clean sample");
  if (!(p > 0.0f && p <= 1.0f)) {
    throw ConfigError("confidence p must lie in (0, 1], got " + std::to_string(p));
  }
  std::vector<float> values;
  values.reserve(samples.size());
  for (const auto& s : samples) {
    if (!std::isfinite(s.value)) throw ConfigError("non-finite indicator for sample '" + s.source_id + "'");
    values.push_back(s.value);
  }
  std::sort(values.begin(), values.end());

  const std::size_t n = values.size();
  // p is an f32 and n < 2^29, so the product is exact in double.
  const auto rank = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(static_cast<double>(p) * n)));
  const float theta = values[rank - 1];
  const auto covered = static_cast<std::size_t>(std::upper_bound(values.begin(), values.end(), theta) - values.begin());
  return ThresholdEstimate{theta, static_cast<double>(covered) / static_cast<double>(n), rank, n};
}

void CalibrationProfile::validate() const {
  if (model_name.empty()) throw ValidationError("model_name", "must not be empty");
  if (layer.empty()) throw ValidationError("layer", "must not be empty");
  if (!(confidence_p > 0.0f && confidence_p <= 1.0f)) throw ValidationError("confidence_p", "must lie in (0, 1]");
  if (!std::isfinite(theta)) throw ValidationError("theta", "must be finite");
  if (n_samples < 1) throw ValidationError("n_samples", "must be at least 1");
}

namespace {

constexpr std::string_view kFormatTag = "patchguard-profile-v1";

std::string float_decimal(float v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string double_decimal(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string float_hex(float v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08x", std::bit_cast<std::uint32_t>(v));
  return buf;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

float parse_float(const std::string& key, std::string_view text) {
  float v = 0.0f;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw FormatError("invalid number for '" + key + "': " + std::string(text));
  }
  return v;
}

float parse_hex_float(const std::string& key, std::string_view text) {
  if (text.size() != 10 || text.substr(0, 2) != "0x") {
    throw FormatError("'" + key + "' must be 0x followed by 8 hex digits");
  }
  std::uint32_t bits = 0;
  const auto [end, ec] = std::from_chars(text.data() + 2, text.data() + text.size(), bits, 16);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw FormatError("invalid hex bit pattern for '" + key + "': " + std::string(text));
  }
  return std::bit_cast<float>(bits);
}

}  // namespace

std::string format_profile(const CalibrationProfile& profile) {
  std::ostringstream out;
  out << "# PatchGuard calibration profile. *_hex values are authoritative.\n"
      << "format = " << kFormatTag << "\n"
      << "model_name = " << profile.model_name << "\n"
      << "layer = " << profile.layer << "\n"
      << "tap = " << tap_name(profile.tap) << "\n"
      << "confidence_p = " << float_decimal(profile.confidence_p) << "\n"
      << "confidence_p_hex = " << float_hex(profile.confidence_p) << "\n"
      << "theta = " << float_decimal(profile.theta) << "\n"
      << "theta_hex = " << float_hex(profile.theta) << "\n"
      << "n_samples = " << profile.n_samples << "\n"
      << "achieved_fraction = " << double_decimal(profile.achieved_fraction) << "\n"
      << "created_at = " << profile.created_at << "\n";
  return out.str();
}

CalibrationProfile parse_profile(std::string_view text) {
  static const std::vector<std::string> kKnownKeys = {
      "format", "model_name", "layer",     "tap",        "confidence_p",     "confidence_p_hex",
      "theta",  "theta_hex",  "n_samples", "created_at", "achieved_fraction"};

  std::map<std::string, std::string> entries;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("profile line " + std::to_string(line_no) + " is not 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
      throw FormatError("unknown profile key '" + key + "' on line " + std::to_string(line_no));
    }
    if (!entries.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
      throw FormatError("duplicate profile key '" + key + "'");
    }
  }

  auto required = [&](const std::string& key) -> const std::string& {
    const auto it = entries.find(key);
    if (it == entries.end()) throw ValidationError(key, "missing required key");
    return it->second;
  };
  auto optional = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = entries.find(key);
    return it == entries.end() ? std::nullopt : std::optional<std::string>(it->second);
  };

  if (auto tag = optional("format"); tag && *tag != kFormatTag) {
    throw FormatError("unsupported profile format '" + *tag + "'");
  }

  CalibrationProfile profile;
  profile.model_name = required("model_name");
  profile.layer = required("layer");
  try {
    profile.tap = parse_tap(required("tap"));
  } catch (const ConfigError& e) {
    throw ValidationError("tap", e.what());
  }
  profile.confidence_p = parse_float("confidence_p", required("confidence_p"));
  if (auto hex = optional("confidence_p_hex")) profile.confidence_p = parse_hex_float("confidence_p_hex", *hex);
  profile.theta = parse_float("theta", required("theta"));
  if (auto hex = optional("theta_hex")) profile.theta = parse_hex_float("theta_hex", *hex);

  const std::string& n = required("n_samples");
  const auto [end, ec] = std::from_chars(n.data(), n.data() + n.size(), profile.n_samples);
  if (ec != std::errc{} || end != n.data() + n.size()) throw FormatError("invalid n_samples: " + n);

  if (auto frac = optional("achieved_fraction")) {
    const auto [fend, fec] = std::from_chars(frac->data(), frac->data() + frac->size(), profile.achieved_fraction);
    if (fec != std::errc{} || fend != frac->data() + frac->size()) {
      throw FormatError("invalid achieved_fraction: " + *frac);
    }
  }
  profile.created_at = optional("created_at").value_or("");
  profile.validate();
  return profile;
}

void save_profile(const CalibrationProfile& profile, const std::filesystem::path& path) {
  profile.validate();
  write_file_atomic(path, format_profile(profile));
}

CalibrationProfile load_profile(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_profile(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

IndicatorCollection collect_clean_indicators(std::span<const std::filesystem::path> image_paths,
                                             const WeightBundle& bundle, std::string_view layer, Tap tap,
                                             std::size_t jobs) {
  if (image_paths.empty()) throw ConfigError("no calibration images given");
  const std::size_t index = activation_index(bundle, resolve_conv_layer(bundle, layer), tap);

  struct Slot {
    std::optional<float> value;
    std::string error;
  };
  std::vector<Slot> slots(image_paths.size());
  parallel_for(image_paths.size(), jobs, [&](std::size_t i) {
    try {
      const Tensor input = preprocess_image(read_image(image_paths[i]), bundle.preprocess);
      const float v = indicator_at_index(input, bundle, index).value;
      if (std::isfinite(v)) {
        slots[i].value = v;
      } else {
        slots[i].error = "non-finite indicator";
      }
    } catch (const Error& e) {
      slots[i].error = e.what();
    }
  });

  IndicatorCollection out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::string id = image_paths[i].string();
    if (slots[i].value) {
      out.samples.push_back(IndicatorSample{*slots[i].value, id});
    } else {
      out.failures.push_back(ImageFailure{id, slots[i].error});
    }
  }
  if (out.samples.empty()) {
    throw InputError("none of the " + std::to_string(image_paths.size()) + " calibration images could be used; first error: " +
                     out.failures.front().message);
  }
  return out;
}

}  // namespace patchguard
