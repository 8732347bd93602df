// Copyright 2026 The UEGD Authors. All Rights Reserved.
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

// Feature archives on disk.
//
// Layout:
//   <root>/manifest.csv                 clip_id,video_id,split,label
//   <root>/<modality>/<clip_id>.msaf    one file per clip and modality
//
// Feature file (little-endian):
//   "MSAF" u16 version=1 u8 modality tag u16 L u32 T u32 D
//   f32 payload in [L][T][D] row-major order

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "uegd/binary_io.hpp"
#include "uegd/diffgraph.hpp"
#include "uegd/error.hpp"
#include "uegd/model.hpp"
#include "uegd/modality.hpp"
#include "uegd/tensor.hpp"

namespace uegd {

namespace fs = std::filesystem;

inline constexpr char kFeatureMagic[4] = {'M', 'S', 'A', 'F'};
inline constexpr std::uint16_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 4 + 2 + 1 + 2 + 4 + 4;

struct FeatureHeader {
  Modality modality = Modality::visual;
  std::uint16_t layers = 1;
  std::uint32_t frames = 0;
  std::uint32_t dims = 0;

  friend bool operator==(const FeatureHeader&, const FeatureHeader&) = default;
};

struct ClipFeatures {
  FeatureHeader header;
  Tensor<float> data;  // [L x T x D]
};

/// Writes x of shape [T x D] (stored with L = 1) or [L x T x D].
inline void write_clip_features(const fs::path& path, Modality modality, const Tensor<float>& x) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError("feature tensor must be [T x D] or [L x T x D], got " +
                         shape_str(x.shape()));
  }
  const std::size_t L = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t T = x.dim(x.rank() - 2), D = x.dim(x.rank() - 1);
  if (L > 0xFFFF || T > 0xFFFFFFFFu || D > 0xFFFFFFFFu) {
    throw DimensionError("feature tensor " + shape_str(x.shape()) + " exceeds format limits");
  }
  for (float v : x.data()) {
    if (!std::isfinite(v)) throw DataError("non-finite feature value for " + path.string());
  }
  binary::Writer w;
  w.raw(std::string_view(kFeatureMagic, 4));
  w.u16(kFeatureVersion);
  w.u8(static_cast<std::uint8_t>(modality));
  w.u16(static_cast<std::uint16_t>(L));
  w.u32(static_cast<std::uint32_t>(T));
  w.u32(static_cast<std::uint32_t>(D));
  w.f32s(x.data());
  w.save(path.string());
}

inline FeatureHeader parse_feature_header(binary::Reader& r) {
  if (r.raw(4, "magic") != std::string_view(kFeatureMagic, 4)) {
    throw FormatError("bad feature file magic", 0);
  }
  const std::size_t version_at = r.offset();
  if (const auto v = r.u16(); v != kFeatureVersion) {
    throw FormatError("unsupported feature file version " + std::to_string(v), version_at);
  }
  FeatureHeader h;
  const std::size_t tag_at = r.offset();
  const auto tag = modality_from_tag(r.u8());
  if (!tag) throw FormatError("invalid modality tag", tag_at);
  h.modality = *tag;
  const std::size_t dims_at = r.offset();
  h.layers = r.u16();
  h.frames = r.u32();
  h.dims = r.u32();
  if (h.layers == 0 || h.frames == 0 || h.dims == 0) {
    throw FormatError("zero extent in feature header", dims_at);
  }
  return h;
}

inline std::uint64_t payload_bytes(const FeatureHeader& h) {
  return std::uint64_t{h.layers} * h.frames * h.dims * 4;
}

inline ClipFeatures read_clip_features(const fs::path& path) {
  binary::Reader r = binary::Reader::from_file(path.string());
  ClipFeatures out;
  out.header = parse_feature_header(r);
  const std::uint64_t want = payload_bytes(out.header);
  if (r.remaining() < want) {
    throw FormatError("truncated payload: expected " + std::to_string(want) + " bytes, found " +
                          std::to_string(r.remaining()),
                      r.offset() + r.remaining());
  }
  if (r.remaining() > want) {
    throw FormatError("trailing bytes after payload", r.offset() + want);
  }
  out.data = Tensor<float>({out.header.layers, out.header.frames, out.header.dims});
  r.f32s(out.data.data(), "payload");
  return out;
}

/// Parses only the fixed-size header and checks the file size against it.
inline FeatureHeader read_feature_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'", 0);
  std::vector<std::uint8_t> bytes(kFeatureHeaderBytes);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  bytes.resize(static_cast<std::size_t>(in.gcount()));
  binary::Reader r(std::move(bytes));
  FeatureHeader h = parse_feature_header(r);
  const auto size = fs::file_size(path);
  if (size != kFeatureHeaderBytes + payload_bytes(h)) {
    throw FormatError("file size " + std::to_string(size) + " does not match header of " +
                          path.string(),
                      std::min<std::uint64_t>(size, kFeatureHeaderBytes + payload_bytes(h)));
  }
  return h;
}

enum class Split : std::uint8_t { train = 0, valid = 1, test = 2 };

inline constexpr std::array<Split, 3> kSplits = {Split::train, Split::valid, Split::test};

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

inline std::optional<Split> parse_split(std::string_view s) {
  for (Split sp : kSplits)
    if (s == split_name(sp)) return sp;
  return std::nullopt;
}

struct ClipRecord {
  std::string clip_id;
  std::string video_id;
  Split split = Split::train;
  float label = 0.0f;

  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

inline constexpr const char* kManifestHeader = "clip_id,video_id,split,label";

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string format_label(float v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Reads and validates a manifest. Row numbers in errors are 1-based file lines.
inline std::vector<ClipRecord> parse_manifest(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != kManifestHeader) {
    throw DataError(source + ": header must be '" + std::string(kManifestHeader) + "'");
  }
  std::vector<ClipRecord> records;
  std::set<std::string> ids;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = source + " row " + std::to_string(row);
    auto fields = detail::split_csv(line);
    if (fields.size() != 4) throw DataError(where + ": expected 4 fields");
    ClipRecord rec;
    rec.clip_id = fields[0];
    rec.video_id = fields[1];
    if (rec.clip_id.empty() || rec.video_id.empty()) throw DataError(where + ": empty id");
    if (rec.clip_id.find_first_of("/\\") != std::string::npos || rec.clip_id == "." ||
        rec.clip_id == "..") {
      throw DataError(where + ": clip_id '" + rec.clip_id + "' is not a valid file name");
    }
    const auto split = parse_split(fields[2]);
    if (!split) throw DataError(where + ": unknown split '" + fields[2] + "'");
    rec.split = *split;
    const std::string& lab = fields[3];
    const auto res = std::from_chars(lab.data(), lab.data() + lab.size(), rec.label);
    if (res.ec != std::errc() || res.ptr != lab.data() + lab.size()) {
      throw DataError(where + ": label '" + lab + "' is not a number");
    }
    if (!(rec.label >= -3.0f && rec.label <= 3.0f)) {
      throw DataError(where + ": label " + lab + " outside [-3, 3]");
    }
    if (!ids.insert(rec.clip_id).second) {
      throw DataError(where + ": duplicate clip_id '" + rec.clip_id + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<ClipRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  return parse_manifest(in, path.string());
}

inline void write_manifest(const fs::path& path, std::span<const ClipRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << kManifestHeader << '\n';
  for (const auto& r : records) {
    out << r.clip_id << ',' << r.video_id << ',' << split_name(r.split) << ','
        << detail::format_label(r.label) << '\n';
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline std::array<std::size_t, 3> split_counts(std::span<const ClipRecord> records) {
  std::array<std::size_t, 3> n{};
  for (const auto& r : records) ++n[static_cast<std::size_t>(r.split)];
  return n;
}

/// Per-modality geometry shared by every clip of an archive.
struct ModalityInfo {
  std::size_t layers = 0;
  std::size_t dims = 0;
};

class FeatureArchive {
 public:
  /// Loads the manifest and validates the header of every feature file of
  /// every modality directory present under `root`.
  static FeatureArchive open(const fs::path& root) {
    FeatureArchive a;
    a.root_ = root;
    a.records_ = load_manifest(root / "manifest.csv");
    for (Modality m : kModalities) {
      if (!fs::is_directory(root / std::string(modality_name(m)))) continue;
      ModalityInfo info;
      for (const auto& rec : a.records_) {
        const fs::path p = a.feature_path(m, rec.clip_id);
        if (!fs::exists(p)) {
          throw DataError("clip '" + rec.clip_id + "' has no " + std::string(modality_name(m)) +
                          " features at " + p.string());
        }
        FeatureHeader h;
        try {
          h = read_feature_header(p);
        } catch (const FormatError& e) {
          throw FormatError(p.string() + ": " + e.what(), e.offset());
        }
        if (h.modality != m) {
          throw DataError(p.string() + ": header modality tag does not match directory");
        }
        if (info.layers == 0) {
          info = {h.layers, h.dims};
        } else if (info.layers != h.layers || info.dims != h.dims) {
          throw DataError(p.string() + ": (L, D) = (" + std::to_string(h.layers) + ", " +
                          std::to_string(h.dims) + ") differs from archive (" +
                          std::to_string(info.layers) + ", " + std::to_string(info.dims) + ")");
        }
      }
      if (info.layers > 0) a.info_[index_of(m)] = info;
    }
    return a;
  }

  const fs::path& root() const noexcept { return root_; }
  const std::vector<ClipRecord>& records() const noexcept { return records_; }
  bool has_modality(Modality m) const { return info_[index_of(m)].has_value(); }

  ModalityInfo info(Modality m) const {
    if (!has_modality(m)) {
      throw DataError("archive " + root_.string() + " has no " + std::string(modality_name(m)) +
                      " features");
    }
    return *info_[index_of(m)];
  }

  fs::path feature_path(Modality m, const std::string& clip_id) const {
    return root_ / std::string(modality_name(m)) / (clip_id + ".msaf");
  }

  ClipFeatures read(Modality m, const std::string& clip_id) const {
    return read_clip_features(feature_path(m, clip_id));
  }

  std::size_t count(Split s) const { return split_counts(records_)[static_cast<std::size_t>(s)]; }

  /// Model geometry implied by the archive for the modalities it holds.
  void fill_config(ModelConfig& cfg) const {
    for (Modality m : kModalities) {
      const std::size_t i = index_of(m);
      if (has_modality(m)) {
        cfg.input_dims[i] = info_[i]->dims;
        cfg.num_layers[i] = info_[i]->layers;
      } else {
        cfg.input_dims[i] = 0;
        cfg.num_layers[i] = 1;
      }
    }
  }

 private:
  fs::path root_;
  std::vector<ClipRecord> records_;
  std::array<std::optional<ModalityInfo>, 3> info_;
};

/// Clips of one split held in memory, each with a [L x T x D] stack per
/// loaded modality.
struct Dataset {
  struct Clip {
    ClipRecord record;
    std::array<std::optional<Tensor<float>>, 3> features;
  };

  std::vector<Clip> clips;

  std::size_t size() const noexcept { return clips.size(); }
  bool empty() const noexcept { return clips.empty(); }

  static Dataset load(const FeatureArchive& archive, Split split,
                      const std::array<bool, 3>& modalities) {
    Dataset ds;
    for (const auto& rec : archive.records()) {
      if (rec.split != split) continue;
      Clip clip{rec, {}};
      for (Modality m : kModalities) {
        if (!modalities[index_of(m)]) continue;
        if (!archive.has_modality(m)) {
          throw DataError("clip '" + rec.clip_id + "' is missing required modality " +
                          std::string(modality_name(m)));
        }
        ClipFeatures f = archive.read(m, rec.clip_id);
        clip.features[index_of(m)] = std::move(f.data);
      }
      ds.clips.push_back(std::move(clip));
    }
    return ds;
  }
};

/// SpecAugment-style masking: one contiguous time block and one contiguous
/// feature block per draw.
struct MaskSpec {
  double max_time_ratio = 0.2;
  double max_feat_ratio = 0.2;
  bool enabled = true;

  void validate() const {
    if (!(max_time_ratio >= 0.0 && max_time_ratio < 1.0) ||
        !(max_feat_ratio >= 0.0 && max_feat_ratio < 1.0)) {
      throw ConfigError("mask ratios must be in [0, 1)");
    }
  }
};

struct MaskBlocks {
  std::size_t time_start = 0, time_width = 0;
  std::size_t feat_start = 0, feat_width = 0;
};

/// Width ~ Uniform{0..floor(ratio * extent)}, start uniform over valid positions.
inline MaskBlocks draw_mask(std::size_t frames, std::size_t dims, const MaskSpec& spec, Rng& rng) {
  auto block = [&rng](std::size_t extent, double ratio, std::size_t& start, std::size_t& width) {
    const auto max_w = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(extent)));
    width = std::uniform_int_distribution<std::size_t>(0, max_w)(rng);
    start = std::uniform_int_distribution<std::size_t>(0, extent - width)(rng);
  };
  MaskBlocks b;
  block(frames, spec.max_time_ratio, b.time_start, b.time_width);
  block(dims, spec.max_feat_ratio, b.feat_start, b.feat_width);
  return b;
}

/// Zeros the blocks in every layer of x ([T x D] or [L x T x D]).
inline void apply_mask(Tensor<float>& x, const MaskBlocks& b) {
  const std::size_t rank = x.rank();
  const std::size_t frames = x.dim(rank - 2), dims = x.dim(rank - 1);
  const std::size_t layers = x.numel() / (frames * dims);
  for (std::size_t l = 0; l < layers; ++l) {
    float* base = &x[l * frames * dims];
    for (std::size_t t = b.time_start; t < b.time_start + b.time_width; ++t)
      std::fill_n(base + t * dims, dims, 0.0f);
    for (std::size_t t = 0; t < frames; ++t)
      std::fill_n(base + t * dims + b.feat_start, b.feat_width, 0.0f);
  }
}

inline Tensor<float> apply_masking(const Tensor<float>& x, const MaskSpec& spec, Rng& rng) {
  if (!spec.enabled) return x;
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError("apply_masking: expected [T x D] or [L x T x D], got " +
                         shape_str(x.shape()));
  }
  Tensor<float> out = x;
  apply_mask(out, draw_mask(x.dim(x.rank() - 2), x.dim(x.rank() - 1), spec, rng));
  return out;
}

/// Index batches for one epoch. With a seed the order is a permutation
/// determined by (seed, epoch); without one it is sequential.
inline std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size,
                                                        std::optional<std::uint64_t> shuffle_seed,
                                                        std::size_t epoch = 0) {
  if (n == 0) throw DataError("cannot iterate an empty split");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle_seed) {
    Rng rng = make_rng(*shuffle_seed, 0x0D0E'0000'0000ull + epoch);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return batches;
}

/// Pads the selected clips into a ClipBatch. When `mask` is given and
/// enabled, each clip's stack is masked independently before padding.
inline ClipBatch<float> collate(const Dataset& ds, std::span<const std::size_t> indices,
                                const std::array<bool, 3>& modalities,
                                const MaskSpec* mask = nullptr, Rng* rng = nullptr) {
  if (indices.empty()) throw DataError("collate: empty batch");
  ClipBatch<float> batch;
  for (std::size_t idx : indices) {
    batch.clip_ids.push_back(ds.clips.at(idx).record.clip_id);
    batch.labels.push_back(ds.clips[idx].record.label);
  }
  const bool masking = mask && mask->enabled && rng;
  for (Modality m : kModalities) {
    const std::size_t mi = index_of(m);
    if (!modalities[mi]) continue;
    std::size_t layers = 0, dims = 0, max_len = 0;
    for (std::size_t idx : indices) {
      const auto& f = ds.clips[idx].features[mi];
      if (!f) {
        throw DataError("clip '" + ds.clips[idx].record.clip_id +
                        "' is missing required modality " + std::string(modality_name(m)));
      }
      layers = f->dim(0);
      dims = f->dim(2);
      max_len = std::max(max_len, f->dim(1));
    }
    ModalBatch<float> mb;
    mb.max_len = max_len;
    mb.stack = Tensor<float>({layers, indices.size() * max_len, dims});
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const Tensor<float>* src = &*ds.clips[indices[b]].features[mi];
      Tensor<float> masked;
      if (masking) {
        masked = apply_masking(*src, *mask, *rng);
        src = &masked;
      }
      if (src->dim(0) != layers || src->dim(2) != dims) {
        throw DataError("clip '" + ds.clips[indices[b]].record.clip_id + "' has " +
                        std::string(modality_name(m)) + " shape " + shape_str(src->shape()) +
                        " inconsistent with the batch");
      }
      const std::size_t len = src->dim(1);
      mb.lengths.push_back(len);
      for (std::size_t l = 0; l < layers; ++l) {
        std::copy_n(&(*src)[l * len * dims], len * dims,
                    &mb.stack[(l * indices.size() * max_len + b * max_len) * dims]);
      }
    }
    batch.inputs[mi] = std::move(mb);
  }
  return batch;
}

/// Parameters of the planted-signal generator.
///
/// Labels are Uniform[-3, 3]. For an informative modality, layer l (1-based)
/// of every frame is (l / L) * y * v_m + N(0, noise_std^2) per element, with
/// v_m a fixed unit vector; other modalities are pure noise.
struct SynthSpec {
  std::array<std::size_t, 3> clips{64, 16, 16};  // train, valid, test
  std::size_t min_frames = 6;
  std::size_t max_frames = 12;
  std::array<std::size_t, 3> dims{8, 8, 8};
  std::size_t layers = 4;
  std::array<bool, 3> modalities{true, true, true};
  std::array<bool, 3> informative{false, true, false};
  double noise_std = 0.5;
  std::uint64_t seed = 0;
  std::size_t clips_per_video = 4;

  void validate() const {
    if (min_frames == 0 || max_frames < min_frames) {
      throw ConfigError("frame range must satisfy 1 <= min <= max");
    }
    if (layers == 0 || layers > 0xFFFF) throw ConfigError("layer count must be in [1, 65535]");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
    if (clips_per_video == 0) throw ConfigError("clips_per_video must be positive");
    bool any = false;
    for (std::size_t i = 0; i < 3; ++i) {
      if (informative[i] && !modalities[i]) {
        throw ConfigError("informative modality " +
                          std::string(modality_name(static_cast<Modality>(i))) +
                          " is not among the generated modalities");
      }
      if (modalities[i] && dims[i] == 0) throw ConfigError("feature dims must be positive");
      any = any || modalities[i];
    }
    if (!any) throw ConfigError("at least one modality must be generated");
  }

  /// Variance of Uniform[-3, 3].
  static constexpr double label_variance() { return 3.0; }
  /// Expected within-video population variance for iid labels.
  double expected_intra_video_variance() const {
    const auto g = static_cast<double>(clips_per_video);
    return label_variance() * (g - 1.0) / g;
  }
};

/// The planted unit direction v_m.
inline std::vector<float> synth_direction(const SynthSpec& spec, Modality m) {
  Rng rng = make_rng(spec.seed, 0xD1'0000 + index_of(m));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t d = spec.dims[index_of(m)];
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  std::vector<float> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

/// Writes a synthetic archive under `root` and opens it.
inline FeatureArchive synth_generate(const SynthSpec& spec, const fs::path& root) {
  spec.validate();
  fs::create_directories(root);
  std::array<std::vector<float>, 3> directions;
  for (Modality m : kModalities) {
    if (spec.modalities[index_of(m)]) {
      fs::create_directories(root / std::string(modality_name(m)));
      directions[index_of(m)] = synth_direction(spec, m);
    }
  }
  Rng rng = make_rng(spec.seed, 0x5E'0000);
  std::uniform_real_distribution<double> label_dist(-3.0, 3.0);
  std::uniform_int_distribution<std::size_t> frame_dist(spec.min_frames, spec.max_frames);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<ClipRecord> records;
  for (Split split : kSplits) {
    const std::size_t n = spec.clips[static_cast<std::size_t>(split)];
    for (std::size_t k = 0; k < n; ++k) {
      char id[32];
      std::snprintf(id, sizeof id, "%s_%05zu", std::string(split_name(split)).c_str(), k);
      ClipRecord rec;
      rec.clip_id = id;
      rec.video_id = std::string(split_name(split)) + "_v" + std::to_string(k / spec.clips_per_video);
      rec.split = split;
      rec.label = static_cast<float>(label_dist(rng));
      const std::size_t frames = frame_dist(rng);
      for (Modality m : kModalities) {
        const std::size_t mi = index_of(m);
        if (!spec.modalities[mi]) continue;
        const std::size_t d = spec.dims[mi];
        Tensor<float> x({spec.layers, frames, d});
        for (std::size_t l = 0; l < spec.layers; ++l) {
          const double scale = static_cast<double>(l + 1) / static_cast<double>(spec.layers);
          for (std::size_t t = 0; t < frames; ++t)
            for (std::size_t j = 0; j < d; ++j) {
              double v = spec.noise_std * noise(rng);
              if (spec.informative[mi]) v += scale * rec.label * directions[mi][j];
              x[(l * frames + t) * d + j] = static_cast<float>(v);
            }
        }
        write_clip_features(root / std::string(modality_name(m)) / (rec.clip_id + ".msaf"), m, x);
      }
      records.push_back(std::move(rec));
    }
  }
  write_manifest(root / "manifest.csv", records);
  return FeatureArchive::open(root);
}

}  // namespace uegd
