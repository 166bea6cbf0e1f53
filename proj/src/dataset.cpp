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

#include "patchguard/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "patchguard/error.hpp"
#include "patchguard/fileio.hpp"
#include "patchguard/parallel.hpp"
#include "patchguard/preprocess.hpp"

namespace patchguard {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void require_unique(std::span<const std::string> ids) {
  std::set<std::string_view> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ConfigError("duplicate image id '" + id + "'");
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view source_id) {
  return splitmix64(seed ^ fnv1a(source_id));
}

// --- splitting --------------------------------------------------------------

void SplitSpec::validate() const {
  if (!(analysis_fraction > 0.0) || !(test_fraction > 0.0)) {
    throw ConfigError("split fractions must be positive");
  }
  if (std::abs(analysis_fraction + test_fraction - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

Split split(std::span<const std::string> ids, const SplitSpec& spec) {
  if (ids.empty()) throw ConfigError("cannot split an empty id list");
  spec.validate();
  require_unique(ids);
  if (spec.stratify_key && spec.stratify_key->size() != ids.size()) {
    throw ConfigError("stratify key has " + std::to_string(spec.stratify_key->size()) + " labels for " +
                      std::to_string(ids.size()) + " ids");
  }

  std::map<std::string, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    classes[spec.stratify_key ? (*spec.stratify_key)[i] : std::string{}].push_back(i);
  }

  std::vector<bool> in_analysis(ids.size(), false);
  for (auto& [label, members] : classes) {
    std::mt19937_64 rng(derive_seed(spec.seed, label));
    std::shuffle(members.begin(), members.end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(spec.analysis_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < take; ++k) in_analysis[members[k]] = true;
  }

  Split out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    (in_analysis[i] ? out.analysis : out.test).push_back(ids[i]);
  }
  return out;
}

// --- patches ----------------------------------------------------------------

std::size_t patch_side(const PatchSpec& spec, std::size_t height, std::size_t width) {
  std::size_t side = 0;
  if (spec.side_override) {
    side = *spec.side_override;
  } else {
    if (!(spec.area_fraction > 0.0 && spec.area_fraction < 1.0)) {
      throw ConfigError("patch area fraction must lie in (0, 1)");
    }
    side = static_cast<std::size_t>(
        std::llround(std::sqrt(spec.area_fraction * static_cast<double>(height) * static_cast<double>(width))));
  }
  if (side < 1) throw ConfigError("patch side rounds to zero");
  if (side > height || side > width) {
    throw ConfigError("patch side " + std::to_string(side) + " does not fit a " + std::to_string(width) + "x" +
                      std::to_string(height) + " image");
  }
  return side;
}

namespace {

Image load_patch_file(const fs::path& path, std::size_t side) {
  Image patch = read_image(path);
  if (patch.channels == 1) {
    Image rgb(patch.width, patch.height, 3);
    for (std::size_t i = 0; i < patch.width * patch.height; ++i) {
      rgb.pixels[3 * i] = rgb.pixels[3 * i + 1] = rgb.pixels[3 * i + 2] = patch.pixels[i];
    }
    patch = std::move(rgb);
  }
  if (patch.width == side && patch.height == side) return patch;
  const auto resized = resize_bilinear(patch, side, side);
  Image out(side, side, 3);
  for (std::size_t i = 0; i < resized.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(resized[i]), 0L, 255L));
  }
  return out;
}

}  // namespace

PatchedImage apply_patch(const Image& image, const PatchSpec& spec) {
  if (image.channels != 3) throw ShapeError("patches can only be applied to 3-channel images");
  const std::size_t side = patch_side(spec, image.height, image.width);

  PlacementRecord where{0, 0, side};
  if (const auto* fixed = std::get_if<FixedPlacement>(&spec.placement)) {
    if (fixed->x + side > image.width || fixed->y + side > image.height) {
      throw ConfigError("fixed patch placement extends outside the image");
    }
    where.x = fixed->x;
    where.y = fixed->y;
  } else {
    std::mt19937_64 rng(std::get<UniformRandom>(spec.placement).seed);
    where.x = std::uniform_int_distribution<std::size_t>(0, image.width - side)(rng);
    where.y = std::uniform_int_distribution<std::size_t>(0, image.height - side)(rng);
  }

  PatchedImage out{image, where};
  Image& dst = out.image;
  std::visit(
      [&](const auto& content) {
        using T = std::decay_t<decltype(content)>;
        if constexpr (std::is_same_v<T, SolidColor>) {
          for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x)
              for (std::size_t c = 0; c < 3; ++c) dst.at(where.y + y, where.x + x, c) = content.rgb[c];
        } else if constexpr (std::is_same_v<T, HighContrastNoise>) {
          std::mt19937_64 rng(content.seed);
          for (std::size_t y = 0; y < side; ++y) {
            for (std::size_t x = 0; x < side; ++x) {
              const std::uint8_t v = (rng() >> 63) ? 255 : 0;
              for (std::size_t c = 0; c < 3; ++c) dst.at(where.y + y, where.x + x, c) = v;
            }
          }
        } else {
          const Image patch = load_patch_file(content.path, side);
          for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x)
              for (std::size_t c = 0; c < 3; ++c) dst.at(where.y + y, where.x + x, c) = patch.at(y, x, c);
        }
      },
      spec.content);
  return out;
}

std::string attack_source(const PatchContent& content) {
  if (const auto* solid = std::get_if<SolidColor>(&content)) {
    return "solid:" + std::to_string(solid->rgb[0]) + "," + std::to_string(solid->rgb[1]) + "," +
           std::to_string(solid->rgb[2]);
  }
  if (const auto* file = std::get_if<FilePatch>(&content)) return "file:" + file->path.string();
  return "noise";
}

// --- labelled test sets -----------------------------------------------------

std::string_view label_name(Label label) { return label == Label::Positive ? "positive" : "negative"; }

std::vector<LabeledSample> build_balanced_testset(std::span<const std::string> test_ids, const PatchSpec& spec,
                                                  std::uint64_t seed) {
  if (test_ids.size() < 2) throw ConfigError("a balanced test set needs at least 2 images");
  require_unique(test_ids);

  std::vector<std::size_t> order(test_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<LabeledSample> out(test_ids.size());
  for (std::size_t i = 0; i < test_ids.size(); ++i) out[i].source_id = test_ids[i];
  for (std::size_t k = 0; k < test_ids.size() / 2; ++k) {
    LabeledSample& sample = out[order[k]];
    PatchSpec patch = spec;
    if (auto* noise = std::get_if<HighContrastNoise>(&patch.content)) {
      noise->seed = derive_seed(seed ^ noise->seed, "content/" + sample.source_id);
    }
    if (auto* random = std::get_if<UniformRandom>(&patch.placement)) {
      random->seed = derive_seed(seed ^ random->seed, "placement/" + sample.source_id);
    }
    sample.label = Label::Positive;
    sample.provenance = std::move(patch);
  }
  return out;
}

// --- manifest ---------------------------------------------------------------

namespace {

constexpr std::string_view kManifestHeader = "# patchguard-manifest-v1";

std::string content_descriptor(const PatchContent& content) {
  if (const auto* noise = std::get_if<HighContrastNoise>(&content)) {
    return "noise:" + std::to_string(noise->seed);
  }
  return attack_source(content);
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = s.find(sep);
    out.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) break;
    s = s.substr(pos + 1);
  }
  return out;
}

template <typename T>
T parse_uint(std::string_view text, std::size_t line_no) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
    throw FormatError("manifest line " + std::to_string(line_no) + ": invalid number '" + std::string(text) + "'");
  }
  return value;
}

PatchContent parse_content(std::string_view text, std::size_t line_no) {
  const auto colon = text.find(':');
  const std::string_view kind = text.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (kind == "noise") return HighContrastNoise{parse_uint<std::uint64_t>(arg, line_no)};
  if (kind == "file" && !arg.empty()) return FilePatch{fs::path(std::string(arg))};
  if (kind == "solid") {
    const auto parts = split_on(arg, ',');
    if (parts.size() != 3) throw FormatError("manifest line " + std::to_string(line_no) + ": solid needs R,G,B");
    SolidColor solid;
    for (std::size_t c = 0; c < 3; ++c) {
      const auto v = parse_uint<unsigned>(parts[c], line_no);
      if (v > 255) throw FormatError("manifest line " + std::to_string(line_no) + ": colour out of range");
      solid.rgb[c] = static_cast<std::uint8_t>(v);
    }
    return solid;
  }
  throw FormatError("manifest line " + std::to_string(line_no) + ": unknown patch content '" + std::string(text) + "'");
}

}  // namespace

std::string format_manifest(std::span<const ManifestRecord> records) {
  std::ostringstream out;
  out << kManifestHeader << "\n# source_id\tlabel\tcontent\tx\ty\tside\n";
  for (const auto& r : records) {
    const LabeledSample& s = r.sample;
    out << s.source_id << '\t' << label_name(s.label) << '\t';
    if (s.label == Label::Positive && s.provenance && r.placement) {
      out << content_descriptor(s.provenance->content) << '\t' << r.placement->x << '\t' << r.placement->y << '\t'
          << r.placement->side;
    } else {
      out << "-\t-\t-\t-";
    }
    out << '\n';
  }
  return out.str();
}

std::vector<ManifestRecord> parse_manifest(std::string_view text) {
  std::vector<ManifestRecord> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  bool header_seen = false;
  for (std::string_view line : split_on(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line == kManifestHeader) header_seen = true;
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_on(line, '\t');
    if (fields.size() != 6) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": expected 6 tab-separated fields");
    }
    ManifestRecord record;
    record.sample.source_id = std::string(fields[0]);
    if (record.sample.source_id.empty()) throw FormatError("manifest line " + std::to_string(line_no) + ": empty id");
    if (!seen.insert(record.sample.source_id).second) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": duplicate id " + record.sample.source_id);
    }
    if (fields[1] == "positive") {
      record.sample.label = Label::Positive;
      PlacementRecord where{parse_uint<std::size_t>(fields[3], line_no), parse_uint<std::size_t>(fields[4], line_no),
                            parse_uint<std::size_t>(fields[5], line_no)};
      PatchSpec spec;
      spec.content = parse_content(fields[2], line_no);
      spec.placement = FixedPlacement{where.x, where.y};
      spec.side_override = where.side;
      record.sample.provenance = spec;
      record.placement = where;
    } else if (fields[1] == "negative") {
      record.sample.label = Label::Negative;
    } else {
      throw FormatError("manifest line " + std::to_string(line_no) + ": label must be positive or negative");
    }
    out.push_back(std::move(record));
  }
  if (!header_seen) throw FormatError("missing manifest header line '" + std::string(kManifestHeader) + "'");
  return out;
}

std::vector<ManifestRecord> load_manifest(const fs::path& path) {
  const auto bytes = read_file(path);
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::vector<ManifestRecord> write_testset(std::span<const LabeledSample> samples, std::span<const fs::path> sources,
                                          const fs::path& out_dir, std::size_t jobs) {
  if (samples.size() != sources.size()) throw ConfigError("one source path is needed per sample");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<ManifestRecord> records(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    const LabeledSample& sample = samples[i];
    Image image = read_image(sources[i]);
    ManifestRecord& record = records[i];
    record.sample = sample;
    if (sample.label == Label::Positive) {
      if (!sample.provenance) throw ConfigError("positive sample '" + sample.source_id + "' has no patch spec");
      PatchedImage patched = apply_patch(image, *sample.provenance);
      image = std::move(patched.image);
      record.placement = patched.placement;
      record.sample.provenance->placement = FixedPlacement{patched.placement.x, patched.placement.y};
      record.sample.provenance->side_override = patched.placement.side;
    }
    write_file_atomic(out_dir / sample.source_id, encode_png(image));
  });
  write_file_atomic(out_dir / "manifest.tsv", format_manifest(records));
  return records;
}

}  // namespace patchguard
