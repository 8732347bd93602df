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

#include "uegd/eval.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "test_support.hpp"

namespace uegd {
namespace {

using testing::TempDir;

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::istringstream in(testing::read_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) rows.push_back(detail::split_csv(line));
  return rows;
}

struct EvalFixture {
  TempDir dir{"uegd_eval"};
  FeatureArchive archive;
  SplitData data;
  ModelConfig cfg;

  explicit EvalFixture(SynthSpec spec = {}) {
    archive = synth_generate(spec, dir.path());
    data = SplitData::load(archive, spec.modalities);
    cfg = testing::tiny_config();
    archive.fill_config(cfg);
  }
};

TEST(EvaluateTest, RepeatedEvaluationIsBitwiseIdentical) {
  EvalFixture fx;
  Rng rng(1);
  auto params = init_params<float>(fx.cfg, rng);
  auto a = evaluate(fx.data.test, params, fx.cfg);
  auto b = evaluate(fx.data.test, params, fx.cfg);
  EXPECT_EQ(std::memcmp(&a.metrics, &b.metrics, offsetof(MetricsReport, n_total)), 0);
  EXPECT_EQ(a.predictions.values, b.predictions.values);
  ASSERT_EQ(a.gates.size(), fx.data.test.size());
  for (std::size_t i = 0; i < a.gates.size(); ++i) EXPECT_EQ(a.gates[i].alpha, b.gates[i].alpha);
}

TEST(EvaluateTest, SingleClipIsDegenerate) {
  EvalFixture fx;
  Rng rng(2);
  auto params = init_params<float>(fx.cfg, rng);
  Dataset one;
  one.clips.push_back(fx.data.test.clips[3]);
  auto r = evaluate(one, params, fx.cfg);
  EXPECT_TRUE(r.metrics.corr_degenerate);
  EXPECT_EQ(r.metrics.corr, 0.0);
  EXPECT_DOUBLE_EQ(r.metrics.mae, std::abs(static_cast<double>(r.predictions.values[0]) -
                                           one.clips[0].record.label));
}

TEST(EvaluateTest, EmptySplitIsDataError) {
  EvalFixture fx;
  Rng rng(3);
  auto params = init_params<float>(fx.cfg, rng);
  EXPECT_THROW(evaluate(Dataset{}, params, fx.cfg), DataError);
}

TEST(GateExportTest, ZeroGateWeightsGiveOneBin) {
  EvalFixture fx;
  Rng rng(4);
  auto params = init_params<float>(fx.cfg, rng);
  auto& w = params.at("decoder.gate.weight");
  std::fill(w.data().begin(), w.data().end(), 0.0f);
  auto ex = export_gates(fx.data.valid, params, fx.cfg);
  ASSERT_EQ(ex.records.size(), fx.data.valid.size());
  for (const auto& r : ex.records)
    for (float a : r.alpha) EXPECT_EQ(a, 0.5f);
  ASSERT_EQ(ex.histogram.size(), 60u);
  for (const auto& row : ex.histogram) {
    if (row.lo == 0.5) {
      EXPECT_EQ(row.count, fx.data.valid.size());
    } else {
      EXPECT_EQ(row.count, 0u);
    }
  }
}

TEST(GateExportTest, UnimodalRecordsEveryGate) {
  EvalFixture fx;
  fx.cfg.modalities = {false, true, false};
  Rng rng(5);
  auto params = init_params<float>(fx.cfg, rng);
  auto ex = export_gates(fx.data.test, params, fx.cfg);
  EXPECT_EQ(ex.records.size(), fx.data.test.size());
  for (const auto& r : ex.records)
    for (float a : r.alpha) {
      EXPECT_GT(a, 0.0f);
      EXPECT_LT(a, 1.0f);
    }
}

TEST(GateHistogramTest, BinEdges) {
  std::vector<GateRecord> recs{{"a", {0.0f, 0.999f, 1.0f}}, {"b", {0.05f, 0.5f, 0.0499f}}};
  auto rows = gate_histogram(recs, 20);
  auto count = [&](Modality m, std::size_t bin) { return rows[index_of(m) * 20 + bin].count; };
  EXPECT_EQ(count(Modality::visual, 0), 1u);
  EXPECT_EQ(count(Modality::visual, 1), 1u);
  EXPECT_EQ(count(Modality::acoustic, 19), 1u);
  EXPECT_EQ(count(Modality::acoustic, 10), 1u);
  EXPECT_EQ(count(Modality::linguistic, 19), 1u);
  EXPECT_EQ(count(Modality::linguistic, 0), 1u);
  EXPECT_DOUBLE_EQ(rows[5].lo, 0.25);
  EXPECT_DOUBLE_EQ(rows[5].hi, 0.30);
}

TEST(ArgmaxLayerTest, TiesGoToLowestLayer) {
  EXPECT_EQ(argmax_layer(std::vector<double>{0.1, 0.5, 0.5, 0.2}), 2u);
  EXPECT_EQ(argmax_layer(std::vector<double>{0.3}), 1u);
  EXPECT_EQ(argmax_layer(std::vector<double>{-0.2, -0.1}), 2u);
  EXPECT_THROW(argmax_layer(std::vector<double>{}), UsageError);
}

TrainConfig quick_train() {
  TrainConfig tc;
  tc.max_epochs = 4;
  tc.patience = 4;
  tc.base_lr = 3e-3;
  tc.seeds = {1, 2};
  return tc;
}

TEST(LayerSweepTest, SingleLayerArchiveSelectsLayerOne) {
  SynthSpec spec;
  spec.layers = 1;
  spec.clips = {32, 16, 16};
  EvalFixture fx(spec);
  auto r = layer_sweep(fx.archive, Modality::acoustic, fx.cfg, quick_train());
  EXPECT_EQ(r.best_layer, 1u);
  EXPECT_EQ(r.valid_corr.size(), 1u);
}

TEST(LayerSweepTest, BestLayerIsArgmaxOfEmittedColumn) {
  SynthSpec spec;
  spec.layers = 4;
  spec.clips = {48, 24, 24};
  EvalFixture fx(spec);
  auto tc = quick_train();
  tc.workers = 2;
  auto r = layer_sweep(fx.archive, Modality::acoustic, fx.cfg, tc);
  write_sweep_csv(fx.dir / "sweep.csv", r);
  auto rows = read_csv(fx.dir / "sweep.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"layer", "valid_corr", "test_mae", "test_corr",
                                               "test_acc2_pos", "test_f1_pos"}));
  std::vector<double> column;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_EQ(std::stoul(rows[k][0]), k);
    column.push_back(std::stod(rows[k][1]));
  }
  EXPECT_EQ(argmax_layer(column), r.best_layer);
  EXPECT_EQ(column, r.valid_corr);
}

TEST(LayerSweepTest, SweepIsDeterministicAcrossWorkerCounts) {
  SynthSpec spec;
  spec.layers = 3;
  spec.clips = {32, 16, 16};
  EvalFixture fx(spec);
  auto tc = quick_train();
  auto a = layer_sweep(fx.archive, Modality::acoustic, fx.cfg, tc);
  tc.workers = 3;
  auto b = layer_sweep(fx.archive, Modality::acoustic, fx.cfg, tc);
  EXPECT_EQ(a.valid_corr, b.valid_corr);
  EXPECT_EQ(a.best_layer, b.best_layer);
}

TEST(LayerSweepTest, TrainingErrorsNameTheLayer) {
  SynthSpec spec;
  spec.layers = 3;
  spec.clips = {16, 8, 8};
  EvalFixture fx(spec);
  // Overwrite layer 2 of one training clip with NaN directly in the file.
  const auto path = fx.archive.feature_path(Modality::acoustic, fx.archive.records()[0].clip_id);
  auto bytes = testing::read_file(path);
  const auto h = read_feature_header(path);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (std::size_t i = 0; i < std::size_t{h.frames} * h.dims; ++i)
    std::memcpy(&bytes[kFeatureHeaderBytes + (h.frames * h.dims + i) * 4], &nan, 4);
  testing::write_file(path, bytes);
  auto tc = quick_train();
  tc.mask.enabled = false;
  try {
    layer_sweep(fx.archive, Modality::acoustic, fx.cfg, tc);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("layer 2: ", 0), 0u) << e.what();
  }
}

TEST(ModalityGapTest, InformativeModalityBeatsNoiseModality) {
  SynthSpec spec;
  spec.clips = {160, 48, 48};
  spec.layers = 1;
  EvalFixture fx(spec);
  TrainConfig tc;
  tc.max_epochs = 15;
  tc.patience = 15;
  tc.base_lr = 3e-3;
  auto corr = [&](std::array<bool, 3> mods) {
    ModelConfig c = fx.cfg;
    c.modalities = mods;
    auto trial = train_one(fx.data.train, fx.data.valid, c, tc, 1);
    return evaluate(fx.data.test, trial.best_params, c).metrics.corr;
  };
  EXPECT_GT(corr({false, true, false}), corr({true, false, false}));
}

TEST(CsvTest, MetricsGatesVarianceHeaders) {
  TempDir dir;
  MetricsReport m;
  m.mae = 0.5;
  m.corr = -0.25;
  write_metrics_csv(dir / "m.csv", m);
  auto rows = read_csv(dir / "m.csv");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"metric", "value"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"mae", "0.5"}));
  EXPECT_EQ(rows[2], (std::vector<std::string>{"corr", "-0.25"}));

  std::vector<GateRecord> recs{{"c1", {0.25f, 0.5f, 0.75f}}};
  write_gates_csv(dir / "g.csv", recs);
  EXPECT_EQ(read_csv(dir / "g.csv")[1], (std::vector<std::string>{"c1", "0.25", "0.5", "0.75"}));
  write_gate_histogram_csv(dir / "h.csv", gate_histogram(recs, 4));
  rows = read_csv(dir / "h.csv");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"modality", "bin_lo", "bin_hi", "count"}));
  EXPECT_EQ(rows.size(), 13u);
  EXPECT_EQ(rows[2], (std::vector<std::string>{"visual", "0.25", "0.5", "1"}));

  std::vector<VarianceReport> v{{"acoustic", 0.25, 0.0}};
  write_variance_csv(dir / "v.csv", v);
  rows = read_csv(dir / "v.csv");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"config", "total_var", "intra_var"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"acoustic", "0.25", "0"}));
}

}  // namespace
}  // namespace uegd
