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

// Define-by-run reverse-mode differentiation over Tensor<T>.
//
// A Tape records every primitive applied during one forward pass. Calling
// backward() replays the recorded rules in reverse order and accumulates
// gradients into the parameter tensors registered with Tape::param().
// The primitive set is deliberately narrow: it covers what the fusion model
// needs and nothing more.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uegd/error.hpp"
#include "uegd/tensor.hpp"

namespace uegd {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream); streams never share state.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

template <class T>
class Tape;

/// Handle to a value recorded on a tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape(); }
  std::size_t numel() const { return value().numel(); }
};

template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Owned value that never receives a gradient.
  Var<T> constant(Tensor<T> value) {
    Node n;
    n.owned = std::move(value);
    return push(std::move(n));
  }

  /// Borrowed value that never receives a gradient. `value` must outlive the tape.
  Var<T> constant_ref(const Tensor<T>& value) {
    Node n;
    n.ref = &value;
    return push(std::move(n));
  }

  /// Leaf bound to an external tensor. If the tensor requires grad, backward()
  /// accumulates into its gradient buffer.
  Var<T> param(Tensor<T>& tensor) {
    Node n;
    n.ref = &tensor;
    n.sink = &tensor;
    n.requires_grad = tensor.requires_grad();
    return push(std::move(n));
  }

  Var<T> record(Tensor<T> value, bool requires_grad, BackwardFn fn) {
    Node n;
    n.owned = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(fn);
    return push(std::move(n));
  }

  const Tensor<T>& value(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.ref ? *n.ref : n.owned;
  }

  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  bool requires_grad(Var<T> v) const { return requires_grad(v.id); }

  /// Gradient buffer of a node, allocated as zeros on first access.
  std::vector<T>& grad(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty()) n.grad.assign(value(id).numel(), T{});
    return n.grad;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Every registered requires-grad
  /// parameter ends with a populated gradient (zeros when unreachable).
  void backward(Var<T> loss) {
    if (loss.tape != this) throw UsageError("backward: loss recorded on another tape");
    if (value(loss.id).numel() != 1) {
      throw UsageError("backward: loss must be scalar, got shape " +
                       shape_str(value(loss.id).shape()));
    }
    if (!nodes_[loss.id].requires_grad) {
      flush_params();
      return;
    }
    grad(loss.id)[0] = T{1};
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.empty()) n.backward(*this, i);
    }
    flush_params();
  }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* ref = nullptr;
    Tensor<T>* sink = nullptr;
    bool requires_grad = false;
    std::vector<T> grad;
    BackwardFn backward;
  };

  Var<T> push(Node n) {
    nodes_.push_back(std::move(n));
    return Var<T>{this, nodes_.size() - 1};
  }

  void flush_params() {
    for (Node& n : nodes_) {
      if (!n.sink || !n.requires_grad) continue;
      std::vector<T>& g = n.sink->mutable_grad();
      for (std::size_t k = 0; k < n.grad.size(); ++k) g[k] += n.grad[k];
    }
  }

  std::vector<Node> nodes_;
};

namespace detail {

template <class T>
void same_tape(Var<T> a, Var<T> b, const char* op) {
  if (a.tape != b.tape) throw UsageError(std::string(op) + ": operands on different tapes");
}

template <class T, class... Vs>
bool any_grad(Var<T> a, Vs... rest) {
  return (a.tape->requires_grad(a) || ... || rest.tape->requires_grad(rest));
}

// Elementwise unary op: `fwd` maps x -> y, `local` maps (x, y) -> dy/dx.
template <class T, class Fwd, class Local>
Var<T> unary(Var<T> x, Fwd fwd, Local local) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = fwd(xv[i]);
  return x.tape->record(std::move(out), any_grad(x),
                        [x, local](Tape<T>& tape, std::size_t self) {
                          const auto& g = tape.grad(self);
                          const auto& xv = tape.value(x.id);
                          const auto& yv = tape.value(self);
                          auto& gx = tape.grad(x.id);
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            gx[i] += g[i] * local(xv[i], yv[i]);
                          }
                        });
}

}  // namespace detail

/// [M x K] * [K x N] -> [M x N].
template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  detail::same_tape(a, b, "matmul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(av.shape()) +
                         " by " + shape_str(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor<T> out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    T* row = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av[i * k + p];
      const T* brow = &bv[p * n];
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return a.tape->record(std::move(out), detail::any_grad(a, b),
                        [a, b, m, k, n](Tape<T>& tape, std::size_t self) {
                          const auto& g = tape.grad(self);
                          const auto& av = tape.value(a.id);
                          const auto& bv = tape.value(b.id);
                          if (tape.requires_grad(a)) {
                            auto& ga = tape.grad(a.id);
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t p = 0; p < k; ++p) {
                                T acc{};
                                for (std::size_t j = 0; j < n; ++j)
                                  acc += g[i * n + j] * bv[p * n + j];
                                ga[i * k + p] += acc;
                              }
                          }
                          if (tape.requires_grad(b)) {
                            auto& gb = tape.grad(b.id);
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t p = 0; p < k; ++p) {
                                const T aip = av[i * k + p];
                                for (std::size_t j = 0; j < n; ++j)
                                  gb[p * n + j] += aip * g[i * n + j];
                              }
                          }
                        });
}

/// Batched product: [B x M x K] * [B x K x N] -> [B x M x N].
template <class T>
Var<T> bmm(Var<T> a, Var<T> b) {
  detail::same_tape(a, b, "bmm");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) ||
      av.dim(2) != bv.dim(1)) {
    throw DimensionError("bmm: cannot multiply " + shape_str(av.shape()) + " by " +
                         shape_str(bv.shape()));
  }
  const std::size_t bs = av.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(2);
  Tensor<T> out({bs, m, n});
  for (std::size_t s = 0; s < bs; ++s) {
    const T* ap = &av[s * m * k];
    const T* bp = &bv[s * k * n];
    T* op = &out[s * m * n];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = ap[i * k + p];
        for (std::size_t j = 0; j < n; ++j) op[i * n + j] += aip * bp[p * n + j];
      }
  }
  return a.tape->record(
      std::move(out), detail::any_grad(a, b),
      [a, b, bs, m, k, n](Tape<T>& tape, std::size_t self) {
        const auto& g = tape.grad(self);
        const auto& av = tape.value(a.id);
        const auto& bv = tape.value(b.id);
        const bool need_a = tape.requires_grad(a), need_b = tape.requires_grad(b);
        for (std::size_t s = 0; s < bs; ++s) {
          const T* gp = &g[s * m * n];
          if (need_a) {
            auto& ga = tape.grad(a.id);
            const T* bp = &bv[s * k * n];
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t p = 0; p < k; ++p) {
                T acc{};
                for (std::size_t j = 0; j < n; ++j) acc += gp[i * n + j] * bp[p * n + j];
                ga[s * m * k + i * k + p] += acc;
              }
          }
          if (need_b) {
            auto& gb = tape.grad(b.id);
            const T* ap = &av[s * m * k];
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t p = 0; p < k; ++p) {
                const T aip = ap[i * k + p];
                for (std::size_t j = 0; j < n; ++j)
                  gb[s * k * n + p * n + j] += aip * gp[i * n + j];
              }
          }
        }
      });
}

/// Swaps the last two axes of a rank-3 tensor.
template <class T>
Var<T> transpose_last2(Var<T> x) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 3) {
    throw DimensionError("transpose_last2: expected rank 3, got " + shape_str(xv.shape()));
  }
  const std::size_t bs = xv.dim(0), r = xv.dim(1), c = xv.dim(2);
  Tensor<T> out({bs, c, r});
  for (std::size_t s = 0; s < bs; ++s)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[s * r * c + j * r + i] = xv[s * r * c + i * c + j];
  return x.tape->record(std::move(out), detail::any_grad(x),
                        [x, bs, r, c](Tape<T>& tape, std::size_t self) {
                          const auto& g = tape.grad(self);
                          auto& gx = tape.grad(x.id);
                          for (std::size_t s = 0; s < bs; ++s)
                            for (std::size_t i = 0; i < r; ++i)
                              for (std::size_t j = 0; j < c; ++j)
                                gx[s * r * c + i * c + j] += g[s * r * c + j * r + i];
                        });
}

template <class T>
Var<T> reshape(Var<T> x, Shape shape) {
  const Tensor<T>& xv = x.value();
  if (shape_numel(shape) != xv.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(xv.shape()) + " as " +
                         shape_str(shape));
  }
  return x.tape->record(xv.reshaped(std::move(shape)), detail::any_grad(x),
                        [x](Tape<T>& tape, std::size_t self) {
                          const auto& g = tape.grad(self);
                          auto& gx = tape.grad(x.id);
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                        });
}

/// Elementwise sum of equally shaped tensors.
template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::same_tape(a, b, "add");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.shape() != bv.shape()) {
    throw DimensionError("add: shape mismatch " + shape_str(av.shape()) + " vs " +
                         shape_str(bv.shape()));
  }
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] + bv[i];
  return a.tape->record(std::move(out), detail::any_grad(a, b),
                        [a, b](Tape<T>& tape, std::size_t self) {
                          const auto& g = tape.grad(self);
                          for (Var<T> v : {a, b}) {
                            if (!tape.requires_grad(v)) continue;
                            auto& gv = tape.grad(v.id);
                            for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
                          }
                        });
}

/// Adds bias[D] to every row of x[... x D].
template <class T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  detail::same_tape(x, bias, "add_bias");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& bv = bias.value();
  const std::size_t d = bv.numel();
  if (bv.rank() != 1 || xv.shape().back() != d) {
    throw DimensionError("add_bias: bias " + shape_str(bv.shape()) +
                         " does not match last axis of " + shape_str(xv.shape()));
  }
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] + bv[i % d];
  return x.tape->record(std::move(out), detail::any_grad(x, bias),
                        [x, bias, d](Tape<T>& tape, std::size_t self) {
                          const auto& g = tape.grad(self);
                          if (tape.requires_grad(x)) {
                            auto& gx = tape.grad(x.id);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          }
                          if (tape.requires_grad(bias)) {
                            auto& gb = tape.grad(bias.id);
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
                          }
                        });
}

/// out[b, f] = x[b, f] * s[b]; x is [B x F], s is [B x 1].
template <class T>
Var<T> scale_rows(Var<T> x, Var<T> s) {
  detail::same_tape(x, s, "scale_rows");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& sv = s.value();
  if (xv.rank() != 2 || sv.rank() != 2 || sv.dim(1) != 1 || sv.dim(0) != xv.dim(0)) {
    throw DimensionError("scale_rows: cannot scale " + shape_str(xv.shape()) + " by " +
                         shape_str(sv.shape()));
  }
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  Tensor<T> out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xv[r * cols + c] * sv[r];
  return x.tape->record(std::move(out), detail::any_grad(x, s),
                        [x, s, rows, cols](Tape<T>& tape, std::size_t self) {
                          const auto& g = tape.grad(self);
                          const auto& xv = tape.value(x.id);
                          const auto& sv = tape.value(s.id);
                          if (tape.requires_grad(x)) {
                            auto& gx = tape.grad(x.id);
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t c = 0; c < cols; ++c)
                                gx[r * cols + c] += g[r * cols + c] * sv[r];
                          }
                          if (tape.requires_grad(s)) {
                            auto& gs = tape.grad(s.id);
                            for (std::size_t r = 0; r < rows; ++r) {
                              T acc{};
                              for (std::size_t c = 0; c < cols; ++c)
                                acc += g[r * cols + c] * xv[r * cols + c];
                              gs[r] += acc;
                            }
                          }
                        });
}

/// Columns [start, start + len) of a rank-2 tensor.
template <class T>
Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t len) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 2 || len == 0 || start + len > xv.dim(1)) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of " + shape_str(xv.shape()));
  }
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  Tensor<T> out({rows, len});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < len; ++c) out[r * len + c] = xv[r * cols + start + c];
  return x.tape->record(std::move(out), detail::any_grad(x),
                        [x, rows, cols, start, len](Tape<T>& tape, std::size_t self) {
                          const auto& g = tape.grad(self);
                          auto& gx = tape.grad(x.id);
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < len; ++c)
                              gx[r * cols + start + c] += g[r * len + c];
                        });
}

/// Concatenates rank-2 tensors with equal row counts along columns.
template <class T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t rows = parts[0].value().dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  bool rg = false;
  for (const Var<T>& p : parts) {
    detail::same_tape(parts[0], p, "concat_cols");
    const Tensor<T>& pv = p.value();
    if (pv.rank() != 2 || pv.dim(0) != rows) {
      throw DimensionError("concat_cols: operand " + shape_str(pv.shape()) +
                           " does not have " + std::to_string(rows) + " rows");
    }
    widths.push_back(pv.dim(1));
    total += pv.dim(1);
    rg = rg || p.tape->requires_grad(p);
  }
  Tensor<T> out({rows, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor<T>& pv = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < widths[k]; ++c)
        out[r * total + offset + c] = pv[r * widths[k] + c];
    offset += widths[k];
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return parts[0].tape->record(
      std::move(out), rg,
      [inputs, widths, rows, total](Tape<T>& tape, std::size_t self) {
        const auto& g = tape.grad(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < inputs.size(); ++k) {
          if (tape.requires_grad(inputs[k])) {
            auto& gk = tape.grad(inputs[k].id);
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < widths[k]; ++c)
                gk[r * widths[k] + c] += g[r * total + offset + c];
          }
          offset += widths[k];
        }
      });
}

template <class T>
Var<T> concat_cols(std::initializer_list<Var<T>> parts) {
  return concat_cols(std::span<const Var<T>>(parts.begin(), parts.size()));
}

/// max(x, 0). The derivative at exactly 0 is taken as 0.
template <class T>
Var<T> relu(Var<T> x) {
  return detail::unary(
      x, [](T v) { return v > T{} ? v : T{}; },
      [](T v, T) { return v > T{} ? T{1} : T{}; });
}

/// Logistic function. Outputs are clamped into the open interval (0, 1) as
/// representable in T, so saturated inputs never produce exactly 0 or 1.
template <class T>
Var<T> sigmoid(Var<T> x) {
  static constexpr T lo = std::numeric_limits<T>::min();
  static constexpr T hi = T{1} - std::numeric_limits<T>::epsilon() / T{2};
  return detail::unary(
      x,
      [](T v) {
        const T s = v >= T{} ? T{1} / (T{1} + std::exp(-v))
                             : std::exp(v) / (T{1} + std::exp(v));
        return std::clamp(s, lo, hi);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <class T>
Var<T> tanh_act(Var<T> x) {
  return detail::unary(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T{1} - y * y; });
}

/// Softmax along `axis`, stabilized by subtracting the running maximum.
/// Entries equal to -inf receive weight exactly 0 as long as one entry per
/// slice is finite.
template <class T>
Var<T> softmax(Var<T> x, std::size_t axis) {
  const Tensor<T>& xv = x.value();
  if (axis >= xv.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(xv.shape()));
  }
  const Shape& sh = xv.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= sh[i];
  for (std::size_t i = axis + 1; i < sh.size(); ++i) inner *= sh[i];
  const std::size_t n = sh[axis];
  Tensor<T> out(sh);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t t = 0; t < n; ++t) mx = std::max(mx, xv[base + t * inner]);
      T total{};
      for (std::size_t t = 0; t < n; ++t) {
        const T e = std::exp(xv[base + t * inner] - mx);
        out[base + t * inner] = e;
        total += e;
      }
      for (std::size_t t = 0; t < n; ++t) out[base + t * inner] /= total;
    }
  return x.tape->record(std::move(out), detail::any_grad(x),
                        [x, outer, inner, n](Tape<T>& tape, std::size_t self) {
                          const auto& g = tape.grad(self);
                          const auto& y = tape.value(self);
                          auto& gx = tape.grad(x.id);
                          for (std::size_t o = 0; o < outer; ++o)
                            for (std::size_t in = 0; in < inner; ++in) {
                              const std::size_t base = o * n * inner + in;
                              T dot{};
                              for (std::size_t t = 0; t < n; ++t)
                                dot += g[base + t * inner] * y[base + t * inner];
                              for (std::size_t t = 0; t < n; ++t) {
                                const std::size_t i = base + t * inner;
                                gx[i] += y[i] * (g[i] - dot);
                              }
                            }
                        });
}

/// Normalizes each row over the last axis (population variance), then applies
/// gain and bias.
template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5)) {
  detail::same_tape(x, gain, "layer_norm");
  detail::same_tape(x, bias, "layer_norm");
  const Tensor<T>& xv = x.value();
  const std::size_t d = xv.shape().back();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                         shape_str(bias.shape()) + " do not match last axis of " +
                         shape_str(xv.shape()));
  }
  const std::size_t rows = xv.numel() / d;
  const Tensor<T>& gv = gain.value();
  const Tensor<T>& bv = bias.value();
  Tensor<T> out(xv.shape());
  std::vector<T> xhat(xv.numel());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = &xv[r * d];
    T mean{};
    for (std::size_t c = 0; c < d; ++c) mean += row[c];
    mean /= static_cast<T>(d);
    T var{};
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<T>(d);
    const T inv = T{1} / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t c = 0; c < d; ++c) {
      const T h = (row[c] - mean) * inv;
      xhat[r * d + c] = h;
      out[r * d + c] = h * gv[c] + bv[c];
    }
  }
  return x.tape->record(
      std::move(out), detail::any_grad(x, gain, bias),
      [x, gain, bias, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape<T>& tape, std::size_t self) {
        const auto& g = tape.grad(self);
        const auto& gv = tape.value(gain.id);
        if (tape.requires_grad(gain)) {
          auto& gg = tape.grad(gain.id);
          for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * xhat[i];
        }
        if (tape.requires_grad(bias)) {
          auto& gb = tape.grad(bias.id);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
        }
        if (tape.requires_grad(x)) {
          auto& gx = tape.grad(x.id);
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_g{}, mean_gx{};
            for (std::size_t c = 0; c < d; ++c) {
              const T gh = g[r * d + c] * gv[c];
              mean_g += gh;
              mean_gx += gh * xhat[r * d + c];
            }
            mean_g /= static_cast<T>(d);
            mean_gx /= static_cast<T>(d);
            for (std::size_t c = 0; c < d; ++c) {
              const T gh = g[r * d + c] * gv[c];
              gx[r * d + c] += inv_std[r] * (gh - mean_g - xhat[r * d + c] * mean_gx);
            }
          }
        }
      });
}

/// Inverted dropout: survivors are scaled by 1 / (1 - rate) while training;
/// inference returns `x` itself.
template <class T>
Var<T> dropout(Var<T> x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const Tensor<T>& xv = x.value();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(xv.numel());
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    mask[i] = unif(rng) < rate ? T{} : scale;
    out[i] = xv[i] * mask[i];
  }
  return x.tape->record(std::move(out), detail::any_grad(x),
                        [x, mask = std::move(mask)](Tape<T>& tape, std::size_t self) {
                          const auto& g = tape.grad(self);
                          auto& gx = tape.grad(x.id);
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                        });
}

/// Mean absolute error. The subgradient at a zero residual is 0.
template <class T>
Var<T> l1_loss(Var<T> pred, Var<T> target) {
  detail::same_tape(pred, target, "l1_loss");
  const Tensor<T>& pv = pred.value();
  const Tensor<T>& tv = target.value();
  if (pv.numel() != tv.numel()) {
    throw DimensionError("l1_loss: prediction " + shape_str(pv.shape()) + " vs target " +
                         shape_str(tv.shape()));
  }
  const std::size_t n = pv.numel();
  T total{};
  for (std::size_t i = 0; i < n; ++i) total += std::abs(pv[i] - tv[i]);
  return pred.tape->record(
      Tensor<T>::scalar(total / static_cast<T>(n)), detail::any_grad(pred, target),
      [pred, target, n](Tape<T>& tape, std::size_t self) {
        const T g = tape.grad(self)[0] / static_cast<T>(n);
        const auto& pv = tape.value(pred.id);
        const auto& tv = tape.value(target.id);
        for (std::size_t i = 0; i < n; ++i) {
          const T r = pv[i] - tv[i];
          const T sgn = r > T{} ? T{1} : (r < T{} ? T{-1} : T{});
          if (tape.requires_grad(pred)) tape.grad(pred.id)[i] += g * sgn;
          if (tape.requires_grad(target)) tape.grad(target.id)[i] -= g * sgn;
        }
      });
}

/// Sum of all elements as a scalar.
template <class T>
Var<T> sum(Var<T> x) {
  const Tensor<T>& xv = x.value();
  T total{};
  for (std::size_t i = 0; i < xv.numel(); ++i) total += xv[i];
  return x.tape->record(Tensor<T>::scalar(total), detail::any_grad(x),
                        [x](Tape<T>& tape, std::size_t self) {
                          const T g = tape.grad(self)[0];
                          auto& gx = tape.grad(x.id);
                          for (auto& v : gx) v += g;
                        });
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<input index>[<element>]"
  bool passed = false;
};

/// Compares reverse-mode gradients against central differences.
///
/// `f` builds a scalar on the tape it is given, registering each input via
/// Tape::param(). The step is `eps` rounded to the nearest power of two so
/// that x +/- h is exact. Relative error is |a - n| / max(1, |a|, |n|).
template <class F>
GradCheckReport grad_check(F&& f, std::span<Tensor<double>* const> inputs,
                           double eps = 1e-5, double tol = 1e-4) {
  const double h = std::exp2(std::round(std::log2(eps)));
  std::vector<bool> saved_flags;
  for (Tensor<double>* t : inputs) {
    saved_flags.push_back(t->requires_grad());
    t->set_requires_grad(true);
    t->clear_grad();
  }
  {
    Tape<double> tape;
    Var<double> out = f(tape);
    tape.backward(out);
  }
  GradCheckReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<double>& x = *inputs[k];
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double orig = x[i];
      x[i] = orig + h;
      double fp, fm;
      {
        Tape<double> tape;
        fp = f(tape).value().item();
      }
      x[i] = orig - h;
      {
        Tape<double> tape;
        fm = f(tape).value().item();
      }
      x[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double rel_err =
          abs_err / std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (report.checked == 0 || rel_err > report.max_rel_error) {
        report.max_rel_error = rel_err;
        report.worst = std::to_string(k) + "[" + std::to_string(i) + "]";
      }
      ++report.checked;
    }
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    inputs[k]->set_requires_grad(saved_flags[k]);
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

/// Single-input convenience form; `f(tape, x)` receives x already on the tape.
template <class F>
GradCheckReport grad_check(F&& f, Tensor<double>& x, double eps = 1e-5, double tol = 1e-4) {
  Tensor<double>* inputs[] = {&x};
  return grad_check([&](Tape<double>& tape) { return f(tape, tape.param(x)); },
                    std::span<Tensor<double>* const>(inputs), eps, tol);
}

}  // namespace uegd
