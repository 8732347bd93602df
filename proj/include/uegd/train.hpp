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

// Optimization: warmup + cosine schedule, Adam, early stopping on the mean
// validation L1, and multi-seed trials.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "uegd/data.hpp"
#include "uegd/diffgraph.hpp"
#include "uegd/metrics.hpp"
#include "uegd/model.hpp"
#include "uegd/parallel.hpp"

namespace uegd {

struct TrainConfig {
  double base_lr = 1e-4;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 100;
  double warmup_frac = 0.1;
  std::size_t patience = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  MaskSpec mask;
  std::size_t workers = 1;

  void validate() const {
    if (!(base_lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) {
      throw ConfigError("warmup fraction must be in (0, 1)");
    }
    if (patience == 0) throw ConfigError("patience must be at least 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("Adam betas must be in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    mask.validate();
  }
};

/// Linear warmup from 0 to base_lr over warmup_frac * total_steps, then
/// half-cosine decay to 0 at total_steps.
inline double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  if (total_steps == 0) return 0.0;
  const double s = static_cast<double>(std::min(step, total_steps));
  const double total = static_cast<double>(total_steps);
  const double warmup = cfg.warmup_frac * total;
  if (s < warmup) return cfg.base_lr * s / warmup;
  const double progress = (s - warmup) / (total - warmup);
  return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

struct OptimizerState {
  std::map<std::string, std::vector<float>> m;
  std::map<std::string, std::vector<float>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update over every parameter, then zeroes the
/// gradients. Parameters without a gradient buffer are treated as having
/// zero gradient.
inline void adam_step(Params<float>& params, OptimizerState& state, double lr,
                      const TrainConfig& cfg) {
  for (auto& [name, t] : params.tensors) {
    if (!t.has_grad()) continue;
    for (float g : t.grad()) {
      if (!std::isfinite(g)) {
        throw TrainingError("non-finite gradient in parameter '" + name + "'");
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : params.tensors) {
    if (!p.requires_grad()) continue;
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) {
      m.assign(p.numel(), 0.0f);
      v.assign(p.numel(), 0.0f);
    }
    const bool has = p.has_grad();
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double g = has ? static_cast<double>(p.grad()[i]) : 0.0;
      m[i] = static_cast<float>(cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g);
      v[i] = static_cast<float>(cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] = static_cast<float>(p[i] - lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
    p.zero_grad();
  }
}

/// Patience counter over per-epoch validation losses (epochs are 1-based).
/// Only a strict decrease counts as improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {
    if (patience == 0) throw ConfigError("patience must be at least 1");
  }

  /// Records the next epoch's loss. Returns true once `patience` epochs have
  /// passed without improvement.
  bool update(double loss) {
    ++epoch_;
    improved_ = loss < best_;
    if (improved_) {
      best_ = loss;
      best_epoch_ = epoch_;
    }
    return epoch_ - best_epoch_ >= patience_;
  }

  bool improved() const noexcept { return improved_; }
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  bool improved_ = false;
};

struct Predictions {
  std::vector<std::string> clip_ids;
  std::vector<std::string> video_ids;
  std::vector<float> values;
  std::vector<float> labels;
  std::vector<std::array<float, 3>> gates;
};

/// Inference-mode forward over a dataset in fixed order.
inline Predictions predict(const Dataset& ds, Params<float>& params, const ModelConfig& cfg,
                           std::size_t batch_size = 16) {
  Predictions out;
  Rng unused(0);
  for (const auto& idx : batch_iter(ds.size(), batch_size, std::nullopt)) {
    ClipBatch<float> batch = collate(ds, idx, cfg.modalities);
    Tape<float> tape;
    ForwardResult<float> res = forward(tape, params, cfg, batch, false, unused);
    const auto& pv = res.prediction.value();
    const auto& gv = res.gates.value();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto& rec = ds.clips[idx[b]].record;
      out.clip_ids.push_back(rec.clip_id);
      out.video_ids.push_back(rec.video_id);
      out.labels.push_back(rec.label);
      out.values.push_back(pv[b]);
      out.gates.push_back({gv[b * 3], gv[b * 3 + 1], gv[b * 3 + 2]});
    }
  }
  return out;
}

inline double mean_l1(const Predictions& p) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    total += std::abs(static_cast<double>(p.values[i]) - p.labels[i]);
  }
  return total / static_cast<double>(p.values.size());
}

struct EpochLog {
  std::size_t epoch = 0;
  double train_l1 = 0.0;
  double valid_l1 = 0.0;
  double lr = 0.0;
};

struct TrialResult {
  std::uint64_t seed = 0;
  Params<float> best_params;
  std::vector<EpochLog> curve;
  std::size_t stop_epoch = 0;
  std::size_t best_epoch = 0;
  double best_valid_l1 = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Random streams of one trial; each is independent of the others.
struct TrialStreams {
  Rng init;
  Rng augment;  // dropout and masking
  std::uint64_t order_seed;

  explicit TrialStreams(std::uint64_t seed)
      : init(make_rng(seed, 1)), augment(make_rng(seed, 2)), order_seed(seed ^ 0x9E3779B97F4A7C15ull) {}
};

/// Trains one model and returns the checkpoint with the lowest mean
/// validation L1. Deterministic for a given seed.
inline TrialResult train_one(const Dataset& train, const Dataset& valid, const ModelConfig& cfg,
                             const TrainConfig& tc, std::uint64_t seed,
                             const EpochCallback& on_epoch = {}) {
  cfg.validate();
  tc.validate();
  if (train.empty()) throw DataError("training split is empty");
  if (valid.empty()) throw DataError("validation split is empty");
  TrialStreams streams(seed);
  Params<float> params = init_params<float>(cfg, streams.init);
  OptimizerState opt;
  EarlyStopping stopper(tc.patience);
  TrialResult result;
  result.seed = seed;
  const std::size_t steps_per_epoch = (train.size() + tc.batch_size - 1) / tc.batch_size;
  const std::size_t total_steps = steps_per_epoch * tc.max_epochs;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    double lr = 0.0;
    for (const auto& idx : batch_iter(train.size(), tc.batch_size, streams.order_seed, epoch)) {
      ClipBatch<float> batch = collate(train, idx, cfg.modalities, &tc.mask, &streams.augment);
      Tape<float> tape;
      ForwardResult<float> res = forward(tape, params, cfg, batch, true, streams.augment);
      Var<float> target = tape.constant(Tensor<float>({batch.size()}, batch.labels));
      Var<float> loss = l1_loss(res.prediction, target);
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) {
        throw TrainingError("loss diverged at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step));
      }
      tape.backward(loss);
      ++step;
      lr = lr_at(step, total_steps, tc);
      try {
        adam_step(params, opt, lr, tc);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step));
      }
      loss_sum += lv * static_cast<double>(batch.size());
    }
    EpochLog log{epoch, loss_sum / static_cast<double>(train.size()),
                 mean_l1(predict(valid, params, cfg, tc.batch_size)), lr};
    if (!std::isfinite(log.valid_l1)) {
      throw TrainingError("validation loss diverged at epoch " + std::to_string(epoch));
    }
    result.curve.push_back(log);
    if (on_epoch) on_epoch(log);
    const bool stop = stopper.update(log.valid_l1);
    if (stopper.improved()) result.best_params = params;
    result.stop_epoch = epoch;
    if (stop) break;
  }
  result.best_epoch = stopper.best_epoch();
  result.best_valid_l1 = stopper.best_loss();
  for (auto& [_, t] : result.best_params.tensors) t.clear_grad();
  return result;
}

struct TrialsReport {
  std::vector<TrialResult> trials;
  std::vector<MetricsReport> valid_metrics;
  std::vector<MetricsReport> test_metrics;
  MetricsReport valid_average;
  MetricsReport test_average;
};

/// One train_one per seed (optionally in parallel), then per-trial metrics on
/// the validation and test splits and their per-metric means.
inline TrialsReport run_trials(const Dataset& train, const Dataset& valid, const Dataset& test,
                               const ModelConfig& cfg, const TrainConfig& tc,
                               const std::function<void(std::size_t, const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  tc.validate();
  if (test.empty()) throw DataError("test split is empty");
  const std::size_t n = tc.seeds.size();
  TrialsReport report;
  report.trials.resize(n);
  report.valid_metrics.resize(n);
  report.test_metrics.resize(n);
  parallel_for(n, tc.workers, [&](std::size_t i) {
    EpochCallback cb;
    if (on_epoch) cb = [&, i](const EpochLog& log) { on_epoch(i, log); };
    report.trials[i] = train_one(train, valid, cfg, tc, tc.seeds[i], cb);
    Params<float>& best = report.trials[i].best_params;
    const Predictions pv = predict(valid, best, cfg, tc.batch_size);
    const Predictions pt = predict(test, best, cfg, tc.batch_size);
    report.valid_metrics[i] = compute_metrics(pv.values, pv.labels);
    report.test_metrics[i] = compute_metrics(pt.values, pt.labels);
  });
  report.valid_average = average_metrics(report.valid_metrics);
  report.test_average = average_metrics(report.test_metrics);
  return report;
}

/// Loads the three splits of the modalities the config uses.
struct SplitData {
  Dataset train, valid, test;

  static SplitData load(const FeatureArchive& archive, const std::array<bool, 3>& modalities) {
    return {Dataset::load(archive, Split::train, modalities),
            Dataset::load(archive, Split::valid, modalities),
            Dataset::load(archive, Split::test, modalities)};
  }
};

}  // namespace uegd
