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

// Unimodal Encoders and Gated Decoder.
//
// Each modality's feature sequence X_m [T x D_m] is encoded into an
// utterance embedding z_m [F]:
//
//   h_t   = dropout(relu(layer_norm(W1 x_t + b1)))
//   s_t^j = u_j . tanh(Wa h_t + ba)            (one query u_j per head)
//   a^j   = softmax_t(s^j)
//   z_m   = W2 concat_j(sum_t a_t^j h_t) + b2  (no activation)
//
// The decoder gates the embeddings with one scalar per modality computed
// from the concatenated supervector, sums them, and regresses a score:
//
//   alpha_m = sigmoid(w_m . [z_v; z_a; z_l] + c_m)
//   y       = W_out dropout(relu(layer_norm(W_fc sum_m alpha_m z_m + b_fc))) + b_out
//
// Unused modalities contribute a zero embedding and their encoders are not
// run. Everything works on padded batches: clip b occupies rows
// [b * max_len, (b + 1) * max_len) of the flattened sequence tensors.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "uegd/diffgraph.hpp"
#include "uegd/error.hpp"
#include "uegd/modality.hpp"
#include "uegd/tensor.hpp"

namespace uegd {

/// How the per-layer hidden states of a frozen encoder become model input.
struct Aggregation {
  enum class Kind : std::uint8_t { final_output = 0, single_layer = 1, weighted_sum = 2 };

  Kind kind = Kind::final_output;
  /// 1-based layer per modality; only read for single_layer.
  std::array<std::uint16_t, 3> layer{1, 1, 1};

  static Aggregation final_output() { return {}; }
  static Aggregation weighted_sum() { return {Kind::weighted_sum, {1, 1, 1}}; }
  static Aggregation single(std::uint16_t v, std::uint16_t a, std::uint16_t l) {
    return {Kind::single_layer, {v, a, l}};
  }
  static Aggregation single(std::uint16_t k) { return single(k, k, k); }

  friend bool operator==(const Aggregation&, const Aggregation&) = default;
};

/// Parses `final`, `weighted`, `single:<k>` or `single:<kv>,<ka>,<kl>`.
inline Aggregation parse_aggregation(const std::string& text) {
  if (text == "final") return Aggregation::final_output();
  if (text == "weighted") return Aggregation::weighted_sum();
  const std::string prefix = "single:";
  if (text.rfind(prefix, 0) == 0) {
    std::vector<int> ks;
    std::stringstream ss(text.substr(prefix.size()));
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t used = 0;
      int k = 0;
      try {
        k = std::stoi(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != item.size() || item.empty() || k < 1 || k > 65535) {
        throw ConfigError("invalid layer index '" + item + "' in aggregation '" + text + "'");
      }
      ks.push_back(k);
    }
    if (ks.size() == 1) return Aggregation::single(static_cast<std::uint16_t>(ks[0]));
    if (ks.size() == 3) {
      return Aggregation::single(static_cast<std::uint16_t>(ks[0]),
                                 static_cast<std::uint16_t>(ks[1]),
                                 static_cast<std::uint16_t>(ks[2]));
    }
  }
  throw ConfigError("invalid aggregation '" + text +
                    "' (expected final | weighted | single:<k> | single:<kv>,<ka>,<kl>)");
}

inline std::string aggregation_str(const Aggregation& a) {
  switch (a.kind) {
    case Aggregation::Kind::final_output: return "final";
    case Aggregation::Kind::weighted_sum: return "weighted";
    case Aggregation::Kind::single_layer:
      if (a.layer[0] == a.layer[1] && a.layer[1] == a.layer[2]) {
        return "single:" + std::to_string(a.layer[0]);
      }
      return "single:" + std::to_string(a.layer[0]) + "," + std::to_string(a.layer[1]) +
             "," + std::to_string(a.layer[2]);
  }
  return "?";
}

struct ModelConfig {
  std::size_t embed_dim = 128;
  std::size_t enc_hidden = 256;
  std::size_t heads = 4;
  std::size_t dec_hidden = 128;
  double dropout = 0.2;
  /// Modalities fed to the decoder; the rest are zero-embedded.
  std::array<bool, 3> modalities{true, true, true};
  Aggregation aggregation;
  /// Feature width per modality. A modality with width 0 has no encoder.
  std::array<std::size_t, 3> input_dims{0, 0, 0};
  /// Encoder layers stored per modality (the L of the feature stacks).
  std::array<std::size_t, 3> num_layers{1, 1, 1};

  bool uses(Modality m) const { return modalities[index_of(m)]; }
  bool has_encoder(Modality m) const { return input_dims[index_of(m)] > 0; }
  std::size_t attention_dim() const { return std::max<std::size_t>(1, enc_hidden / 2); }

  void validate() const {
    if (embed_dim == 0 || enc_hidden == 0 || heads == 0 || dec_hidden == 0) {
      throw ConfigError("embed_dim, enc_hidden, heads and dec_hidden must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw ConfigError("dropout must be in [0, 1), got " + std::to_string(dropout));
    }
    bool any = false;
    for (Modality m : kModalities) {
      const std::size_t i = index_of(m);
      if (!modalities[i]) continue;
      any = true;
      if (input_dims[i] == 0) {
        throw ConfigError("modality " + std::string(modality_name(m)) +
                          " is enabled but has no input dimension");
      }
      if (num_layers[i] == 0) {
        throw ConfigError("modality " + std::string(modality_name(m)) + " has zero layers");
      }
      if (aggregation.kind == Aggregation::Kind::single_layer &&
          (aggregation.layer[i] < 1 || aggregation.layer[i] > num_layers[i])) {
        throw ConfigError("layer " + std::to_string(aggregation.layer[i]) + " for " +
                          std::string(modality_name(m)) + " is outside [1, " +
                          std::to_string(num_layers[i]) + "]");
      }
    }
    if (!any) throw ConfigError("at least one modality must be enabled");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// All trainable tensors, keyed by dotted name. Iteration order is the
/// lexicographic name order and is stable across runs.
template <class T>
class Params {
 public:
  std::map<std::string, Tensor<T>> tensors;

  Tensor<T>& at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw UsageError("no parameter named '" + name + "'");
    return it->second;
  }
  const Tensor<T>& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw UsageError("no parameter named '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return tensors.count(name) > 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors) n += t.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [_, t] : tensors) t.zero_grad();
  }

  template <class U>
  Params<U> cast() const {
    Params<U> out;
    for (const auto& [name, t] : tensors) out.tensors.emplace(name, t.template cast<U>());
    return out;
  }
};

inline std::string param_name(Modality m, const char* suffix) {
  return std::string(modality_name(m)) + "." + suffix;
}

/// Name and shape of every parameter, in creation order.
inline std::vector<std::pair<std::string, Shape>> param_shapes(const ModelConfig& cfg) {
  std::vector<std::pair<std::string, Shape>> out;
  const std::size_t h = cfg.enc_hidden, f = cfg.embed_dim, da = cfg.attention_dim();
  for (Modality m : kModalities) {
    const std::size_t d = cfg.input_dims[index_of(m)];
    if (d == 0) continue;
    out.emplace_back(param_name(m, "fc1.weight"), Shape{d, h});
    out.emplace_back(param_name(m, "fc1.bias"), Shape{h});
    out.emplace_back(param_name(m, "ln1.gain"), Shape{h});
    out.emplace_back(param_name(m, "ln1.bias"), Shape{h});
    out.emplace_back(param_name(m, "attn.weight"), Shape{h, da});
    out.emplace_back(param_name(m, "attn.bias"), Shape{da});
    out.emplace_back(param_name(m, "attn.query"), Shape{da, cfg.heads});
    out.emplace_back(param_name(m, "fc2.weight"), Shape{cfg.heads * h, f});
    out.emplace_back(param_name(m, "fc2.bias"), Shape{f});
    if (cfg.aggregation.kind == Aggregation::Kind::weighted_sum) {
      out.emplace_back(param_name(m, "layer_logits"), Shape{cfg.num_layers[index_of(m)]});
    }
  }
  out.emplace_back("decoder.gate.weight", Shape{3 * f, 3});
  out.emplace_back("decoder.gate.bias", Shape{3});
  out.emplace_back("decoder.fc.weight", Shape{f, cfg.dec_hidden});
  out.emplace_back("decoder.fc.bias", Shape{cfg.dec_hidden});
  out.emplace_back("decoder.ln.gain", Shape{cfg.dec_hidden});
  out.emplace_back("decoder.ln.bias", Shape{cfg.dec_hidden});
  out.emplace_back("decoder.out.weight", Shape{cfg.dec_hidden, 1});
  out.emplace_back("decoder.out.bias", Shape{1});
  return out;
}

/// Closed-form parameter count.
inline std::size_t parameter_count(const ModelConfig& cfg) {
  const std::size_t h = cfg.enc_hidden, f = cfg.embed_dim, da = cfg.attention_dim();
  const std::size_t dh = cfg.dec_hidden;
  std::size_t n = 0;
  for (Modality m : kModalities) {
    const std::size_t d = cfg.input_dims[index_of(m)];
    if (d == 0) continue;
    n += (d + 3) * h + (h + 1) * da + da * cfg.heads + (cfg.heads * h + 1) * f;
    if (cfg.aggregation.kind == Aggregation::Kind::weighted_sum) n += cfg.num_layers[index_of(m)];
  }
  n += 3 * f * 3 + 3 + (f + 3) * dh + dh + 1;
  return n;
}

/// Glorot-uniform weights, zero biases, unit gains, zero layer logits.
template <class T>
Params<T> init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  Params<T> params;
  for (auto& [name, shape] : param_shapes(cfg)) {
    Tensor<T> t(shape);
    const bool is_gain = name.ends_with(".gain");
    if (is_gain) {
      for (auto& v : t.data()) v = T{1};
    } else if (shape.size() == 2) {
      const double limit = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      std::uniform_real_distribution<double> unif(-limit, limit);
      for (auto& v : t.data()) v = static_cast<T>(unif(rng));
    }
    t.set_requires_grad(true);
    params.tensors.emplace(name, std::move(t));
  }
  return params;
}

/// One modality's features for a padded batch.
template <class T>
struct ModalBatch {
  /// [L x (B * max_len) x D]; padded rows are zero.
  Tensor<T> stack;
  std::vector<std::size_t> lengths;
  std::size_t max_len = 0;

  std::size_t batch_size() const { return lengths.size(); }
  std::size_t layers() const { return stack.dim(0); }
  std::size_t width() const { return stack.dim(2); }

  template <class U>
  ModalBatch<U> cast() const {
    return {stack.template cast<U>(), lengths, max_len};
  }
};

template <class T>
struct ClipBatch {
  std::vector<std::string> clip_ids;
  std::vector<T> labels;
  std::array<std::optional<ModalBatch<T>>, 3> inputs;

  std::size_t size() const { return clip_ids.size(); }

  template <class U>
  ClipBatch<U> cast() const {
    ClipBatch<U> out;
    out.clip_ids = clip_ids;
    out.labels.assign(labels.begin(), labels.end());
    for (std::size_t i = 0; i < 3; ++i) {
      if (inputs[i]) out.inputs[i] = inputs[i]->template cast<U>();
    }
    return out;
  }
};

/// Reduces a layer stack [L x N x D] to [N x D].
///
/// final_output takes layer L, single_layer takes `layer` (1-based), and
/// weighted_sum forms sum_l softmax(logits)_l * stack[l].
template <class T>
Var<T> layer_aggregate(Tape<T>& tape, const Tensor<T>& stack, Aggregation::Kind kind,
                       std::size_t layer,
                       std::optional<std::type_identity_t<Var<T>>> logits = std::nullopt) {
  if (stack.rank() != 3) {
    throw DimensionError("layer_aggregate: expected [L x N x D], got " + shape_str(stack.shape()));
  }
  const std::size_t L = stack.dim(0), n = stack.dim(1), d = stack.dim(2);
  if (kind == Aggregation::Kind::weighted_sum) {
    if (!logits || logits->numel() != L) {
      throw ConfigError("layer_aggregate: weighted_sum needs " + std::to_string(L) +
                        " layer logits");
    }
    Var<T> weights = reshape(softmax(*logits, 0), {1, L});
    Var<T> flat = tape.constant(stack.reshaped({L, n * d}));
    return reshape(matmul(weights, flat), {n, d});
  }
  const std::size_t k = kind == Aggregation::Kind::final_output ? L : layer;
  if (k < 1 || k > L) {
    throw ConfigError("layer_aggregate: layer " + std::to_string(k) + " outside [1, " +
                      std::to_string(L) + "]");
  }
  const auto first = stack.data().begin() + static_cast<std::ptrdiff_t>((k - 1) * n * d);
  return tape.constant(Tensor<T>({n, d}, std::vector<T>(first, first + static_cast<std::ptrdiff_t>(n * d))));
}

template <class T>
struct PoolResult {
  Var<T> pooled;   // [B x heads*H]
  Var<T> weights;  // [B x max_len x heads]
};

/// Multi-head additive attention pooling over the valid steps of each clip.
/// Padded steps get a score of -inf and therefore zero weight.
template <class T>
PoolResult<T> self_attentive_pool(Var<T> h, std::span<const std::size_t> lengths,
                                  std::size_t max_len, Var<T> attn_weight, Var<T> attn_bias,
                                  Var<T> query) {
  Tape<T>& tape = *h.tape;
  const std::size_t batch = lengths.size();
  const std::size_t hidden = h.shape().at(1);
  const std::size_t heads = query.shape().at(1);
  if (h.shape()[0] != batch * max_len) {
    throw DimensionError("self_attentive_pool: " + shape_str(h.shape()) + " is not " +
                         std::to_string(batch) + " clips of " + std::to_string(max_len) +
                         " steps");
  }
  Var<T> scores = matmul(tanh_act(add_bias(matmul(h, attn_weight), attn_bias)), query);
  Tensor<T> mask({batch, max_len, heads});
  for (std::size_t b = 0; b < batch; ++b) {
    if (lengths[b] == 0 || lengths[b] > max_len) {
      throw DimensionError("self_attentive_pool: clip length " + std::to_string(lengths[b]) +
                           " outside [1, " + std::to_string(max_len) + "]");
    }
    for (std::size_t t = lengths[b]; t < max_len; ++t)
      for (std::size_t j = 0; j < heads; ++j)
        mask[(b * max_len + t) * heads + j] = -std::numeric_limits<T>::infinity();
  }
  Var<T> masked = add(reshape(scores, {batch, max_len, heads}), tape.constant(std::move(mask)));
  Var<T> alpha = softmax(masked, 1);
  Var<T> pooled = bmm(transpose_last2(alpha), reshape(h, {batch, max_len, hidden}));
  return {reshape(pooled, {batch, heads * hidden}), alpha};
}

/// Encodes x [B*max_len x D] to utterance embeddings [B x F].
template <class T>
Var<T> unimodal_encode(Var<T> x, std::span<const std::size_t> lengths, std::size_t max_len,
                       Params<T>& params, Modality m, const ModelConfig& cfg, bool training,
                       Rng& rng, Var<T>* attention = nullptr) {
  Tape<T>& tape = *x.tape;
  const std::size_t d = cfg.input_dims[index_of(m)];
  if (x.shape().size() != 2 || x.shape()[1] != d) {
    throw DimensionError(std::string(modality_name(m)) + " encoder expects width " +
                         std::to_string(d) + ", got " + shape_str(x.shape()));
  }
  auto p = [&](const char* suffix) { return tape.param(params.at(param_name(m, suffix))); };
  Var<T> h = add_bias(matmul(x, p("fc1.weight")), p("fc1.bias"));
  h = dropout(relu(layer_norm(h, p("ln1.gain"), p("ln1.bias"))), cfg.dropout, training, rng);
  PoolResult<T> pool =
      self_attentive_pool(h, lengths, max_len, p("attn.weight"), p("attn.bias"), p("attn.query"));
  if (attention) *attention = pool.weights;
  return add_bias(matmul(pool.pooled, p("fc2.weight")), p("fc2.bias"));
}

template <class T>
struct GateResult {
  Var<T> fused;  // [B x F]
  Var<T> gates;  // [B x 3], columns visual, acoustic, linguistic
};

/// Scalar sigmoid gate per modality from the concatenated supervector, then
/// the gate-weighted sum of the three embeddings.
template <class T>
GateResult<T> gate_fuse(Var<T> z_v, Var<T> z_a, Var<T> z_l, Params<T>& params) {
  Tape<T>& tape = *z_v.tape;
  Var<T> super = concat_cols({z_v, z_a, z_l});
  Var<T> gates = sigmoid(add_bias(matmul(super, tape.param(params.at("decoder.gate.weight"))),
                                  tape.param(params.at("decoder.gate.bias"))));
  const std::array<Var<T>, 3> z{z_v, z_a, z_l};
  Var<T> fused = scale_rows(z[0], slice_cols(gates, 0, 1));
  for (std::size_t m = 1; m < 3; ++m) fused = add(fused, scale_rows(z[m], slice_cols(gates, m, 1)));
  return {fused, gates};
}

/// Regresses one unclamped score per row of the fused embedding.
template <class T>
Var<T> decode(Var<T> fused, Params<T>& params, const ModelConfig& cfg, bool training, Rng& rng) {
  Tape<T>& tape = *fused.tape;
  auto p = [&](const char* name) { return tape.param(params.at(name)); };
  Var<T> h = add_bias(matmul(fused, p("decoder.fc.weight")), p("decoder.fc.bias"));
  h = dropout(relu(layer_norm(h, p("decoder.ln.gain"), p("decoder.ln.bias"))), cfg.dropout,
              training, rng);
  Var<T> y = add_bias(matmul(h, p("decoder.out.weight")), p("decoder.out.bias"));
  return reshape(y, {fused.shape()[0]});
}

template <class T>
struct ForwardResult {
  Var<T> prediction;               // [B]
  Var<T> gates;                    // [B x 3]
  std::array<Var<T>, 3> embeddings;  // [B x F] each; zeros for unused modalities
};

/// Aggregated encoder input for one modality of a batch.
template <class T>
Var<T> modal_input(Tape<T>& tape, const ModalBatch<T>& in, Params<T>& params, Modality m,
                   const ModelConfig& cfg) {
  const std::size_t i = index_of(m);
  std::optional<Var<T>> logits;
  if (cfg.aggregation.kind == Aggregation::Kind::weighted_sum) {
    logits = tape.param(params.at(param_name(m, "layer_logits")));
  }
  return layer_aggregate(tape, in.stack, cfg.aggregation.kind, cfg.aggregation.layer[i], logits);
}

template <class T>
ForwardResult<T> forward(Tape<T>& tape, Params<T>& params, const ModelConfig& cfg,
                         const ClipBatch<T>& batch, bool training, Rng& rng) {
  const std::size_t b = batch.size();
  if (b == 0) throw DataError("forward: empty batch");
  ForwardResult<T> out;
  for (Modality m : kModalities) {
    const std::size_t i = index_of(m);
    if (!cfg.uses(m)) {
      out.embeddings[i] = tape.constant(Tensor<T>({b, cfg.embed_dim}));
      continue;
    }
    const auto& in = batch.inputs[i];
    if (!in) {
      throw DataError("clip '" + batch.clip_ids.front() + "' is missing required modality " +
                      std::string(modality_name(m)));
    }
    if (in->batch_size() != b) {
      throw DimensionError(std::string(modality_name(m)) + " input holds " +
                           std::to_string(in->batch_size()) + " clips, batch has " +
                           std::to_string(b));
    }
    Var<T> x = modal_input(tape, *in, params, m, cfg);
    out.embeddings[i] = unimodal_encode(x, std::span<const std::size_t>(in->lengths), in->max_len,
                                        params, m, cfg, training, rng);
  }
  GateResult<T> g = gate_fuse(out.embeddings[0], out.embeddings[1], out.embeddings[2], params);
  out.gates = g.gates;
  out.prediction = decode(g.fused, params, cfg, training, rng);
  return out;
}

}  // namespace uegd
