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

// Parameter checkpoint:
//
//   "UEGDP\0"  u16 version
//   config:    u32 embed_dim, u32 enc_hidden, u32 heads, u32 dec_hidden,
//              f64 dropout, u8 modality bitmask (bit i = modality tag i),
//              u8 aggregation kind, u16 x3 single-layer indices,
//              u32 x3 input dims, u16 x3 layer counts
//   tensors until end of file, each:
//              u16 name length, utf-8 name, u8 rank, u32 x rank extents,
//              f32 payload
//
// All integers and floats are little-endian.

#pragma once

#include <set>
#include <string>

#include "uegd/binary_io.hpp"
#include "uegd/model.hpp"

namespace uegd {

inline constexpr char kCheckpointMagic[6] = {'U', 'E', 'G', 'D', 'P', '\0'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  Params<float> params;
};

inline void write_model_config(binary::Writer& w, const ModelConfig& cfg) {
  w.u32(static_cast<std::uint32_t>(cfg.embed_dim));
  w.u32(static_cast<std::uint32_t>(cfg.enc_hidden));
  w.u32(static_cast<std::uint32_t>(cfg.heads));
  w.u32(static_cast<std::uint32_t>(cfg.dec_hidden));
  w.f64(cfg.dropout);
  std::uint8_t mask = 0;
  for (std::size_t i = 0; i < 3; ++i) mask |= cfg.modalities[i] ? (1u << i) : 0u;
  w.u8(mask);
  w.u8(static_cast<std::uint8_t>(cfg.aggregation.kind));
  for (auto k : cfg.aggregation.layer) w.u16(k);
  for (auto d : cfg.input_dims) w.u32(static_cast<std::uint32_t>(d));
  for (auto l : cfg.num_layers) w.u16(static_cast<std::uint16_t>(l));
}

inline ModelConfig read_model_config(binary::Reader& r) {
  ModelConfig cfg;
  cfg.embed_dim = r.u32();
  cfg.enc_hidden = r.u32();
  cfg.heads = r.u32();
  cfg.dec_hidden = r.u32();
  cfg.dropout = r.f64();
  const std::size_t mask_at = r.offset();
  const std::uint8_t mask = r.u8();
  if (mask > 7) throw FormatError("invalid modality mask", mask_at);
  for (std::size_t i = 0; i < 3; ++i) cfg.modalities[i] = (mask >> i) & 1u;
  const std::size_t kind_at = r.offset();
  const std::uint8_t kind = r.u8();
  if (kind > 2) throw FormatError("invalid aggregation kind", kind_at);
  cfg.aggregation.kind = static_cast<Aggregation::Kind>(kind);
  for (auto& k : cfg.aggregation.layer) k = r.u16();
  for (auto& d : cfg.input_dims) d = r.u32();
  for (auto& l : cfg.num_layers) l = r.u16();
  return cfg;
}

inline std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& cfg,
                                                   const Params<float>& params) {
  binary::Writer w;
  w.raw(std::string_view(kCheckpointMagic, sizeof kCheckpointMagic));
  w.u16(kCheckpointVersion);
  write_model_config(w, cfg);
  for (const auto& [name, t] : params.tensors) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    w.f32s(t.data());
  }
  return w.bytes();
}

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                            const Params<float>& params) {
  binary::Writer::save_bytes(path, encode_checkpoint(cfg, params));
}

/// Parses a checkpoint and checks that the tensor set is exactly what the
/// stored configuration implies.
inline Checkpoint decode_checkpoint(binary::Reader r) {
  if (r.raw(6, "magic") != std::string_view(kCheckpointMagic, 6)) {
    throw FormatError("bad checkpoint magic", 0);
  }
  const std::size_t version_at = r.offset();
  if (const auto v = r.u16(); v != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(v), version_at);
  }
  Checkpoint ck;
  ck.config = read_model_config(r);
  try {
    ck.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("stored model config invalid: ") + e.what(), r.offset());
  }
  while (!r.at_end()) {
    const std::size_t start = r.offset();
    const std::uint16_t len = r.u16();
    std::string name = r.raw(len, "tensor name");
    const std::uint8_t rank = r.u8();
    if (rank == 0) throw FormatError("tensor '" + name + "' has rank 0", start);
    Shape shape(rank);
    for (auto& e : shape) {
      const std::size_t at = r.offset();
      e = r.u32();
      if (e == 0) throw FormatError("tensor '" + name + "' has a zero extent", at);
    }
    std::uint64_t numel = 1;
    for (auto e : shape) {
      numel *= e;
      if (numel > r.remaining() / 4) {
        throw FormatError("tensor '" + name + "' extends past end of file", r.offset());
      }
    }
    Tensor<float> t(shape);
    r.f32s(t.data(), "tensor payload");
    t.set_requires_grad(true);
    if (!ck.params.tensors.emplace(std::move(name), std::move(t)).second) {
      throw FormatError("duplicate tensor", start);
    }
  }
  std::set<std::string> seen;
  for (const auto& [name, shape] : param_shapes(ck.config)) {
    if (!ck.params.contains(name)) {
      throw FormatError("checkpoint lacks tensor '" + name + "'", r.offset());
    }
    if (ck.params.at(name).shape() != shape) {
      throw FormatError("tensor '" + name + "' has shape " +
                            shape_str(ck.params.at(name).shape()) + ", config implies " +
                            shape_str(shape),
                        r.offset());
    }
    seen.insert(name);
  }
  if (seen.size() != ck.params.tensors.size()) {
    throw FormatError("checkpoint holds tensors the config does not define", r.offset());
  }
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(binary::Reader::from_file(path));
}

}  // namespace uegd
