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

#include "patchguard/bundle.hpp"

#include <bit>
#include <cstring>
#include <set>

#include <zlib.h>

#include "patchguard/error.hpp"
#include "patchguard/fileio.hpp"

namespace patchguard {

namespace {

constexpr std::uint8_t kMagic[4] = {'P', 'G', 'W', 'B'};
constexpr std::uint32_t kPreprocessBlockSize = 4 + 4 + 4 + 12 + 12 + 1;
constexpr std::uint32_t kMaxNameLength = 255;
constexpr std::uint32_t kMaxLayers = 4096;
constexpr std::uint32_t kMaxChannels = 1u << 16;

enum class LayerTag : std::uint8_t { Conv = 1, Relu = 2, MaxPool2x2 = 3 };

std::uint32_t checksum(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

class Writer {
 public:
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string("truncated data reading ") + what, pos_);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::vector<float> f32_array(std::size_t count, const char* what) {
    need(count * 4, what);
    std::vector<float> out(count);
    for (auto& v : out) v = f32(what);
    return out;
  }
  std::string str(const char* what) {
    const std::size_t at = pos_;
    const std::uint32_t len = u32(what);
    if (len > kMaxNameLength) {
      throw FormatError(std::string(what) + " length " + std::to_string(len) + " exceeds limit", at);
    }
    need(len, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::optional<std::size_t> WeightBundle::find_layer(std::string_view name) const {
  for (std::size_t i = 0; i < layer_names.size(); ++i) {
    if (layer_names[i] == name) return i;
  }
  return std::nullopt;
}

void WeightBundle::validate() const {
  if (model_name.empty()) throw ValidationError("model_name", "must not be empty");
  preprocess.validate();
  if (layers.empty()) throw ValidationError("layers", "bundle has no layers");
  if (layer_names.size() != layers.size()) {
    throw ValidationError("layers", std::to_string(layer_names.size()) + " names for " +
                                        std::to_string(layers.size()) + " layers");
  }
  std::set<std::string_view> seen;
  std::optional<std::size_t> channels;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string& name = layer_names[i];
    const std::string subject = name.empty() ? "layer " + std::to_string(i) : name;
    if (name.empty()) throw ValidationError(subject, "empty layer name");
    if (!seen.insert(name).second) throw ValidationError(subject, "duplicate layer name");
    if (const auto* conv = std::get_if<ConvLayerSpec>(&layers[i])) {
      try {
        conv->check();
      } catch (const ShapeError& e) {
        throw ValidationError(subject, e.what());
      }
      if (channels && *channels != conv->in_channels) {
        throw ValidationError(subject, "expects " + std::to_string(conv->in_channels) +
                                           " input channels but previous conv produces " +
                                           std::to_string(*channels));
      }
      channels = conv->out_channels;
    }
  }
}

std::vector<std::uint8_t> encode_bundle(const WeightBundle& bundle) {
  Writer w;
  w.bytes(kMagic);
  w.u16(kBundleVersion);
  w.str(bundle.model_name);

  const Preprocess& pre = bundle.preprocess;
  w.u32(kPreprocessBlockSize);
  w.u32(static_cast<std::uint32_t>(pre.target_height));
  w.u32(static_cast<std::uint32_t>(pre.target_width));
  w.f32(pre.scale);
  for (float m : pre.channel_mean) w.f32(m);
  for (float s : pre.channel_std) w.f32(s);
  w.u8(static_cast<std::uint8_t>(pre.channel_order));

  w.u32(static_cast<std::uint32_t>(bundle.layers.size()));
  for (std::size_t i = 0; i < bundle.layers.size(); ++i) {
    w.str(i < bundle.layer_names.size() ? bundle.layer_names[i] : std::string{});
    std::visit(
        [&](const auto& layer) {
          using T = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<T, ConvLayerSpec>) {
            w.u8(static_cast<std::uint8_t>(LayerTag::Conv));
            w.u32(static_cast<std::uint32_t>(layer.out_channels));
            w.u32(static_cast<std::uint32_t>(layer.in_channels));
            w.u32(3);
            w.u32(3);
            for (float v : layer.kernel) w.f32(v);
            for (float v : layer.bias) w.f32(v);
          } else if constexpr (std::is_same_v<T, ReluLayer>) {
            w.u8(static_cast<std::uint8_t>(LayerTag::Relu));
          } else {
            w.u8(static_cast<std::uint8_t>(LayerTag::MaxPool2x2));
          }
        },
        bundle.layers[i]);
  }
  auto& out = w.buffer();
  const std::uint32_t crc = checksum(out);
  w.u32(crc);
  return std::move(out);
}

WeightBundle decode_bundle(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError("bad magic, not a PGWB weight bundle", 0);
  }
  for (int i = 0; i < 4; ++i) r.u8("magic");
  const std::size_t version_at = r.offset();
  const std::uint16_t version = r.u16("version");
  if (version != kBundleVersion) {
    throw FormatError("unsupported bundle version " + std::to_string(version), version_at);
  }

  WeightBundle bundle;
  bundle.model_name = r.str("model name");

  const std::size_t pre_at = r.offset();
  if (r.u32("preprocess block size") != kPreprocessBlockSize) {
    throw FormatError("unexpected preprocess block size", pre_at);
  }
  Preprocess& pre = bundle.preprocess;
  pre.target_height = r.u32("target height");
  pre.target_width = r.u32("target width");
  pre.scale = r.f32("scale");
  for (float& m : pre.channel_mean) m = r.f32("channel mean");
  for (float& s : pre.channel_std) s = r.f32("channel std");
  const std::size_t order_at = r.offset();
  const std::uint8_t order = r.u8("channel order");
  if (order > 1) throw FormatError("unknown channel order " + std::to_string(order), order_at);
  pre.channel_order = static_cast<ChannelOrder>(order);

  const std::size_t count_at = r.offset();
  const std::uint32_t count = r.u32("layer count");
  if (count > kMaxLayers) throw FormatError("layer count " + std::to_string(count) + " exceeds limit", count_at);

  for (std::uint32_t i = 0; i < count; ++i) {
    bundle.layer_names.push_back(r.str("layer name"));
    const std::size_t tag_at = r.offset();
    const std::uint8_t tag = r.u8("layer kind");
    switch (static_cast<LayerTag>(tag)) {
      case LayerTag::Conv: {
        const std::size_t dims_at = r.offset();
        ConvLayerSpec conv;
        conv.out_channels = r.u32("conv out channels");
        conv.in_channels = r.u32("conv in channels");
        const std::uint32_t kh = r.u32("kernel height");
        const std::uint32_t kw = r.u32("kernel width");
        if (kh != 3 || kw != 3) throw FormatError("only 3x3 kernels are supported", dims_at);
        if (conv.out_channels == 0 || conv.in_channels == 0 || conv.out_channels > kMaxChannels ||
            conv.in_channels > kMaxChannels) {
          throw FormatError("conv channel counts out of range", dims_at);
        }
        conv.kernel = r.f32_array(conv.out_channels * conv.in_channels * 9, "conv kernel");
        conv.bias = r.f32_array(conv.out_channels, "conv bias");
        bundle.layers.emplace_back(std::move(conv));
        break;
      }
      case LayerTag::Relu:
        bundle.layers.emplace_back(ReluLayer{});
        break;
      case LayerTag::MaxPool2x2:
        bundle.layers.emplace_back(MaxPool2x2Layer{});
        break;
      default:
        throw FormatError("unknown layer kind " + std::to_string(tag), tag_at);
    }
  }

  const std::size_t crc_at = r.offset();
  const std::uint32_t stored = r.u32("checksum");
  if (r.remaining() != 0) throw FormatError("trailing bytes after checksum", r.offset());
  if (stored != checksum(bytes.first(crc_at))) throw FormatError("checksum mismatch", crc_at);

  bundle.validate();
  return bundle;
}

WeightBundle load_bundle(const std::filesystem::path& path) {
  return decode_bundle(read_file(path));
}

void save_bundle(const WeightBundle& bundle, const std::filesystem::path& path) {
  write_file_atomic(path, encode_bundle(bundle));
}

}  // namespace patchguard
