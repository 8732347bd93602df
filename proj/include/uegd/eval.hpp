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

// Evaluation and analyses: metrics with gate records, gate histograms,
// total / intra-video variance, and the per-layer sweep.

#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "uegd/data.hpp"
#include "uegd/metrics.hpp"
#include "uegd/model.hpp"
#include "uegd/parallel.hpp"
#include "uegd/train.hpp"

namespace uegd {

struct GateRecord {
  std::string clip_id;
  std::array<float, 3> alpha{};  // visual, acoustic, linguistic
};

struct EvalResult {
  MetricsReport metrics;
  std::vector<GateRecord> gates;
  Predictions predictions;
};

inline std::vector<GateRecord> gate_records(const Predictions& p) {
  std::vector<GateRecord> out;
  out.reserve(p.clip_ids.size());
  for (std::size_t i = 0; i < p.clip_ids.size(); ++i) out.push_back({p.clip_ids[i], p.gates[i]});
  return out;
}

/// Deterministic evaluation: no dropout, no masking.
inline EvalResult evaluate(const Dataset& ds, Params<float>& params, const ModelConfig& cfg,
                           std::size_t batch_size = 16) {
  if (ds.empty()) throw DataError("evaluate: split has no clips");
  EvalResult r;
  r.predictions = predict(ds, params, cfg, batch_size);
  r.metrics = compute_metrics(r.predictions.values, r.predictions.labels);
  r.gates = gate_records(r.predictions);
  return r;
}

struct HistogramRow {
  Modality modality;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins over [0, 1] for each modality's gate; 1.0 falls in the last bin.
inline std::vector<HistogramRow> gate_histogram(std::span<const GateRecord> records,
                                                std::size_t bins = 20) {
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  std::vector<HistogramRow> rows;
  for (Modality m : kModalities) {
    std::vector<std::size_t> counts(bins, 0);
    for (const auto& r : records) {
      const double a = r.alpha[index_of(m)];
      auto b = static_cast<std::size_t>(a * static_cast<double>(bins));
      counts[std::min(b, bins - 1)] += 1;
    }
    for (std::size_t b = 0; b < bins; ++b) {
      rows.push_back({m, static_cast<double>(b) / static_cast<double>(bins),
                      static_cast<double>(b + 1) / static_cast<double>(bins), counts[b]});
    }
  }
  return rows;
}

struct GateExport {
  std::vector<GateRecord> records;
  std::vector<HistogramRow> histogram;
};

inline GateExport export_gates(const Dataset& ds, Params<float>& params, const ModelConfig& cfg,
                               std::size_t bins = 20) {
  GateExport out;
  out.records = gate_records(predict(ds, params, cfg));
  out.histogram = gate_histogram(out.records, bins);
  return out;
}

struct LayerSweepResult {
  Modality modality = Modality::visual;
  std::vector<double> valid_corr;       // index k-1 holds layer k
  std::vector<MetricsReport> test;      // averaged over seeds
  std::size_t best_layer = 0;           // 1-based
};

/// 1-based argmax; ties resolve to the lowest layer.
inline std::size_t argmax_layer(std::span<const double> corr) {
  if (corr.empty()) throw UsageError("argmax_layer: no layers");
  std::size_t best = 0;
  for (std::size_t k = 1; k < corr.size(); ++k)
    if (corr[k] > corr[best]) best = k;
  return best + 1;
}

/// Trains one unimodal model per layer (same seeds for every layer), selects
/// the layer with the highest mean validation correlation.
inline LayerSweepResult layer_sweep(const FeatureArchive& archive, Modality modality,
                                    const ModelConfig& base, const TrainConfig& tc) {
  std::array<bool, 3> only{};
  only[index_of(modality)] = true;
  ModelConfig cfg = base;
  archive.fill_config(cfg);
  cfg.modalities = only;
  const std::size_t L = archive.info(modality).layers;
  const SplitData data = SplitData::load(archive, only);
  LayerSweepResult result;
  result.modality = modality;
  result.valid_corr.resize(L);
  result.test.resize(L);
  TrainConfig inner = tc;
  inner.workers = 1;
  parallel_for(L, tc.workers, [&](std::size_t k) {
    ModelConfig layer_cfg = cfg;
    layer_cfg.aggregation = Aggregation::single(static_cast<std::uint16_t>(k + 1));
    try {
      TrialsReport r = run_trials(data.train, data.valid, data.test, layer_cfg, inner);
      result.valid_corr[k] = r.valid_average.corr;
      result.test[k] = r.test_average;
    } catch (const TrainingError& e) {
      throw TrainingError("layer " + std::to_string(k + 1) + ": " + e.what());
    }
  });
  result.best_layer = argmax_layer(result.valid_corr);
  return result;
}

// CSV emission. Floats are written with enough digits to round-trip.

namespace detail {

inline std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  return out;
}

}  // namespace detail

inline void write_metrics_csv(const fs::path& path, const MetricsReport& m) {
  auto out = detail::open_csv(path);
  out << "metric,value\n"
      << "mae," << m.mae << '\n'
      << "corr," << m.corr << '\n'
      << "acc2_nonneg," << m.acc2_nonneg << '\n'
      << "acc2_pos," << m.acc2_pos << '\n'
      << "f1_nonneg," << m.f1_nonneg << '\n'
      << "f1_pos," << m.f1_pos << '\n'
      << "n_total," << m.n_total << '\n'
      << "n_nonzero," << m.n_nonzero << '\n'
      << "corr_degenerate," << (m.corr_degenerate ? 1 : 0) << '\n';
}

inline void write_gates_csv(const fs::path& path, std::span<const GateRecord> records) {
  auto out = detail::open_csv(path);
  out << "clip_id,alpha_visual,alpha_acoustic,alpha_linguistic\n";
  for (const auto& r : records) {
    out << r.clip_id << ',' << r.alpha[0] << ',' << r.alpha[1] << ',' << r.alpha[2] << '\n';
  }
}

inline void write_gate_histogram_csv(const fs::path& path, std::span<const HistogramRow> rows) {
  auto out = detail::open_csv(path);
  out << "modality,bin_lo,bin_hi,count\n";
  for (const auto& r : rows) {
    out << modality_name(r.modality) << ',' << r.lo << ',' << r.hi << ',' << r.count << '\n';
  }
}

inline void write_sweep_csv(const fs::path& path, const LayerSweepResult& s) {
  auto out = detail::open_csv(path);
  out << "layer,valid_corr,test_mae,test_corr,test_acc2_pos,test_f1_pos\n";
  for (std::size_t k = 0; k < s.valid_corr.size(); ++k) {
    const auto& t = s.test[k];
    out << k + 1 << ',' << s.valid_corr[k] << ',' << t.mae << ',' << t.corr << ',' << t.acc2_pos
        << ',' << t.f1_pos << '\n';
  }
}

inline void write_variance_csv(const fs::path& path, std::span<const VarianceReport> rows) {
  auto out = detail::open_csv(path);
  out << "config,total_var,intra_var\n";
  for (const auto& r : rows) out << r.tag << ',' << r.total_var << ',' << r.intra_var << '\n';
}

}  // namespace uegd
