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

// Command-line front end: synth, train, eval, sweep, analyze.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "uegd/uegd.hpp"

namespace {

namespace fs = std::filesystem;
using namespace uegd;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Reads flat `key=value` files. Keys without a section apply to the
// subcommand being run; '_' in keys is accepted for '-'.
class FlatConfig : public CLI::ConfigBase {
 public:
  std::string section;

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigBase::from_config(input);
    for (auto& item : items) {
      std::replace(item.name.begin(), item.name.end(), '_', '-');
      if (item.parents.empty() && !section.empty()) item.parents = {section};
    }
    return items;
  }
};

std::array<bool, 3> parse_modality_list(const std::string& text) {
  std::array<bool, 3> out{};
  if (text == "all") return {true, true, true};
  std::stringstream ss(text);
  std::string item;
  bool any = false;
  while (std::getline(ss, item, ',')) {
    out[index_of(parse_modality(item))] = true;
    any = true;
  }
  if (!any) throw ConfigError("empty modality list");
  return out;
}

std::string modality_list_str(const std::array<bool, 3>& mods) {
  std::string out;
  for (Modality m : kModalities) {
    if (!mods[index_of(m)]) continue;
    if (!out.empty()) out += '+';
    out += modality_name(m);
  }
  return out;
}

struct ModelOptions {
  std::size_t embed_dim = 128;
  std::size_t enc_hidden = 256;
  std::size_t heads = 4;
  std::size_t dec_hidden = 128;
  double dropout = 0.2;
  std::string modalities = "v,a,l";
  std::string aggregation = "final";

  void add_to(CLI::App* app, bool with_selection) {
    app->add_option("--embed-dim", embed_dim, "Utterance embedding size")->capture_default_str();
    app->add_option("--enc-hidden", enc_hidden, "Encoder hidden units")->capture_default_str();
    app->add_option("--heads", heads, "Self-attentive pooling heads")->capture_default_str();
    app->add_option("--dec-hidden", dec_hidden, "Decoder hidden units")->capture_default_str();
    app->add_option("--dropout", dropout, "Dropout rate")->capture_default_str();
    if (with_selection) {
      app->add_option("--modalities", modalities,
                      "Modalities fed to the decoder: comma list of visual|acoustic|linguistic "
                      "(or v|a|l), or 'all'")
          ->capture_default_str();
      app->add_option("--aggregation", aggregation,
                      "Layer aggregation: final | weighted | single:<k> | single:<kv>,<ka>,<kl>")
          ->capture_default_str();
    }
  }

  ModelConfig build() const {
    ModelConfig cfg;
    cfg.embed_dim = embed_dim;
    cfg.enc_hidden = enc_hidden;
    cfg.heads = heads;
    cfg.dec_hidden = dec_hidden;
    cfg.dropout = dropout;
    cfg.modalities = parse_modality_list(modalities);
    cfg.aggregation = parse_aggregation(aggregation);
    return cfg;
  }
};

struct TrainOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t batch_size = 16;
  double lr = 1e-4;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  double warmup_frac = 0.1;
  double mask_ratio = 0.2;
  bool no_mask = false;
  std::size_t workers = 1;

  void add_to(CLI::App* app) {
    app->add_option("--seeds", seeds, "Comma-separated trial seeds")
        ->delimiter(',')
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
        ->capture_default_str();
    app->add_option("--batch-size", batch_size, "Clips per batch")->capture_default_str();
    app->add_option("--lr", lr, "Base learning rate")->capture_default_str();
    app->add_option("--max-epochs", max_epochs, "Epoch limit per trial")->capture_default_str();
    app->add_option("--patience", patience, "Early-stopping patience in epochs")
        ->capture_default_str();
    app->add_option("--warmup-frac", warmup_frac, "Fraction of steps spent warming up")
        ->capture_default_str();
    app->add_option("--mask-ratio", mask_ratio,
                    "Maximum fraction of frames and of feature dims masked per clip")
        ->capture_default_str();
    app->add_flag("--no-mask", no_mask, "Disable masking augmentation");
    app->add_option("--workers", workers, "Trials (or layers) trained in parallel")
        ->capture_default_str();
  }

  TrainConfig build() const {
    TrainConfig tc;
    tc.seeds = seeds;
    tc.batch_size = batch_size;
    tc.base_lr = lr;
    tc.max_epochs = max_epochs;
    tc.patience = patience;
    tc.warmup_frac = warmup_frac;
    tc.mask = MaskSpec{mask_ratio, mask_ratio, !no_mask};
    tc.workers = workers;
    tc.validate();
    return tc;
  }
};

/// Creates `<base>/<YYYYmmdd-HHMMSS>-seed<seed>[-n]` and returns it.
fs::path make_run_dir(const fs::path& base, std::uint64_t seed, const std::string& suffix = {}) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  std::string name = std::string(stamp) + "-seed" + std::to_string(seed) + suffix;
  fs::path dir = base / name;
  for (int n = 2; fs::exists(dir); ++n) dir = base / (name + "-" + std::to_string(n));
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  return out;
}

/// Copies archive geometry into `cfg` and checks the result.
ModelConfig resolve_model(const FeatureArchive& archive, ModelConfig cfg) {
  for (Modality m : kModalities) {
    if (cfg.uses(m) && !archive.has_modality(m)) {
      throw ConfigError("archive " + archive.root().string() + " has no " +
                        std::string(modality_name(m)) + " features");
    }
  }
  archive.fill_config(cfg);
  cfg.validate();
  return cfg;
}

/// Checks that a checkpoint's encoders fit the archive's features.
void check_compatible(const ModelConfig& ck, const FeatureArchive& archive) {
  for (Modality m : kModalities) {
    if (!ck.uses(m)) continue;
    const std::size_t i = index_of(m);
    const std::string name(modality_name(m));
    if (!archive.has_modality(m)) {
      throw ConfigError("checkpoint uses " + name + " but the archive has no " + name +
                        " features");
    }
    const ModalityInfo info = archive.info(m);
    if (info.dims != ck.input_dims[i] || info.layers != ck.num_layers[i]) {
      throw ConfigError("checkpoint expects " + name + " features with " +
                        std::to_string(ck.num_layers[i]) + " layers of width " +
                        std::to_string(ck.input_dims[i]) + ", archive has " +
                        std::to_string(info.layers) + " layers of width " +
                        std::to_string(info.dims));
    }
  }
}

Split split_from(const std::string& s) {
  const auto sp = parse_split(s);
  if (!sp) throw ConfigError("unknown split '" + s + "'");
  return *sp;
}

// synth ---------------------------------------------------------------------

struct SynthOptions {
  std::string out;
  std::size_t train = 64, valid = 16, test = 16;
  std::size_t layers = 4;
  std::vector<std::size_t> dims{8};
  std::size_t min_frames = 6, max_frames = 12;
  std::string modalities = "v,a,l";
  std::string informative = "acoustic";
  double noise_std = 0.5;
  std::uint64_t seed = 0;
  std::size_t clips_per_video = 4;
  bool force = false;
};

int run_synth(const SynthOptions& o) {
  SynthSpec spec;
  spec.clips = {o.train, o.valid, o.test};
  spec.layers = o.layers;
  const auto& dims = o.dims;
  if (dims.size() == 1) {
    spec.dims = {dims[0], dims[0], dims[0]};
  } else if (dims.size() == 3) {
    spec.dims = {dims[0], dims[1], dims[2]};
  } else {
    throw ConfigError("--dims takes one width or three (visual,acoustic,linguistic)");
  }
  spec.min_frames = o.min_frames;
  spec.max_frames = o.max_frames;
  spec.modalities = parse_modality_list(o.modalities);
  spec.informative = o.informative == "none" ? std::array<bool, 3>{}
                                             : parse_modality_list(o.informative);
  spec.noise_std = o.noise_std;
  spec.seed = o.seed;
  spec.clips_per_video = o.clips_per_video;
  spec.validate();
  const fs::path root(o.out);
  if (fs::exists(root / "manifest.csv") && !o.force) {
    throw ConfigError(root.string() + " already holds an archive (use --force to overwrite)");
  }
  const FeatureArchive archive = synth_generate(spec, root);
  std::cout << "wrote " << archive.records().size() << " clips (train "
            << archive.count(Split::train) << ", valid " << archive.count(Split::valid)
            << ", test " << archive.count(Split::test) << ") to " << root.string() << '\n';
  return kExitOk;
}

// train ---------------------------------------------------------------------

struct RunOptions {
  std::string archive;
  std::string out = "runs";
  ModelOptions model;
  TrainOptions train;
};

void write_results_row(std::ostream& out, const std::string& trial, const std::string& seed,
                       const MetricsReport& m) {
  out << trial << ',' << seed << ',' << m.mae << ',' << m.corr << ',' << m.acc2_nonneg << ','
      << m.acc2_pos << ',' << m.f1_nonneg << ',' << m.f1_pos << '\n';
}

void write_effective_config(const fs::path& path, const RunOptions& o, const ModelConfig& cfg,
                            const TrainConfig& tc) {
  auto out = open_out(path);
  out << "archive=" << fs::absolute(o.archive).string() << '\n'
      << "modalities=" << modality_list_str(cfg.modalities) << '\n'
      << "aggregation=" << aggregation_str(cfg.aggregation) << '\n'
      << "embed-dim=" << cfg.embed_dim << '\n'
      << "enc-hidden=" << cfg.enc_hidden << '\n'
      << "heads=" << cfg.heads << '\n'
      << "dec-hidden=" << cfg.dec_hidden << '\n'
      << "dropout=" << cfg.dropout << '\n'
      << "seeds=";
  for (std::size_t i = 0; i < tc.seeds.size(); ++i) out << (i ? "," : "") << tc.seeds[i];
  out << '\n'
      << "batch-size=" << tc.batch_size << '\n'
      << "lr=" << tc.base_lr << '\n'
      << "max-epochs=" << tc.max_epochs << '\n'
      << "patience=" << tc.patience << '\n'
      << "warmup-frac=" << tc.warmup_frac << '\n'
      << "mask-ratio=" << tc.mask.max_time_ratio << '\n'
      << "no-mask=" << (tc.mask.enabled ? "false" : "true") << '\n'
      << "workers=" << tc.workers << '\n';
}

int run_train(const RunOptions& o) {
  const TrainConfig tc = o.train.build();
  const ModelConfig requested = o.model.build();
  const FeatureArchive archive = FeatureArchive::open(o.archive);
  const ModelConfig cfg = resolve_model(archive, requested);
  const SplitData data = SplitData::load(archive, cfg.modalities);
  if (data.train.empty() || data.valid.empty() || data.test.empty()) {
    throw DataError("archive needs non-empty train, valid and test splits");
  }

  const fs::path run = make_run_dir(o.out, tc.seeds.front());
  write_effective_config(run / "config.txt", o, cfg, tc);
  auto stem = [&](std::size_t i) {
    return "trial" + std::to_string(i + 1) + "_seed" + std::to_string(tc.seeds[i]);
  };
  std::vector<std::ofstream> logs;
  for (std::size_t i = 0; i < tc.seeds.size(); ++i) {
    logs.push_back(open_out(run / (stem(i) + ".log")));
    logs.back() << "epoch,train_l1,valid_l1,lr\n" << std::flush;
  }
  std::cerr << "run directory: " << run.string() << '\n';
  TrialsReport report;
  try {
    report = run_trials(data.train, data.valid, data.test, cfg, tc,
                        [&](std::size_t i, const EpochLog& e) {
                          logs[i] << e.epoch << ',' << e.train_l1 << ',' << e.valid_l1 << ','
                                  << e.lr << '\n'
                                  << std::flush;
                        });
  } catch (const TrainingError&) {
    std::cerr << "partial logs kept in " << run.string() << '\n';
    throw;
  }
  auto results = open_out(run / "results.csv");
  results << "trial,seed,mae,corr,acc2_nonneg,acc2_pos,f1_nonneg,f1_pos\n";
  for (std::size_t i = 0; i < report.trials.size(); ++i) {
    const auto& t = report.trials[i];
    save_checkpoint((run / (stem(i) + ".ckpt")).string(), cfg, t.best_params);
    write_results_row(results, std::to_string(i + 1), std::to_string(t.seed),
                      report.test_metrics[i]);
    std::cerr << "trial " << i + 1 << " (seed " << t.seed << "): stopped at epoch "
              << t.stop_epoch << ", best epoch " << t.best_epoch << ", test mae "
              << report.test_metrics[i].mae << ", corr " << report.test_metrics[i].corr << '\n';
  }
  write_results_row(results, "avg", "", report.test_average);
  std::cout << run.string() << '\n';
  return kExitOk;
}

// eval ----------------------------------------------------------------------

struct EvalOptions {
  std::string archive;
  std::string checkpoint;
  std::string split = "test";
  std::string out;
  std::size_t bins = 20;
};

int run_eval(const EvalOptions& o) {
  const Split split = split_from(o.split);
  if (o.bins == 0) throw ConfigError("--bins must be positive");
  Checkpoint ck = load_checkpoint(o.checkpoint);
  const FeatureArchive archive = FeatureArchive::open(o.archive);
  check_compatible(ck.config, archive);
  const Dataset ds = Dataset::load(archive, split, ck.config.modalities);
  if (ds.empty()) throw DataError("split " + o.split + " has no clips");
  const fs::path out =
      o.out.empty() ? fs::path(o.checkpoint).parent_path() /
                          ("eval_" + fs::path(o.checkpoint).stem().string() + "_" + o.split)
                    : fs::path(o.out);
  const EvalResult r = evaluate(ds, ck.params, ck.config);
  fs::create_directories(out);
  write_metrics_csv(out / "metrics.csv", r.metrics);
  write_gates_csv(out / "gates.csv", r.gates);
  write_gate_histogram_csv(out / "gate_hist.csv", gate_histogram(r.gates, o.bins));
  std::cerr << o.split << ": mae " << r.metrics.mae << ", corr " << r.metrics.corr
            << (r.metrics.corr_degenerate ? " (degenerate)" : "") << ", acc2 "
            << r.metrics.acc2_nonneg << " / " << r.metrics.acc2_pos << ", f1 "
            << r.metrics.f1_nonneg << " / " << r.metrics.f1_pos << '\n';
  std::cout << out.string() << '\n';
  return kExitOk;
}

// sweep ---------------------------------------------------------------------

struct SweepOptions {
  RunOptions run;
  std::string modality;
};

int run_sweep(const SweepOptions& o) {
  const Modality modality = parse_modality(o.modality);
  const TrainConfig tc = o.run.train.build();
  ModelConfig requested = o.run.model.build();
  requested.modalities = {};
  requested.modalities[index_of(modality)] = true;
  requested.aggregation = Aggregation::final_output();
  const FeatureArchive archive = FeatureArchive::open(o.run.archive);
  const ModelConfig cfg = resolve_model(archive, requested);
  const fs::path run =
      make_run_dir(o.run.out, tc.seeds.front(), "-sweep-" + std::string(modality_name(modality)));
  const LayerSweepResult r = layer_sweep(archive, modality, cfg, tc);
  write_sweep_csv(run / "sweep.csv", r);
  std::cerr << "best " << modality_name(modality) << " layer: " << r.best_layer
            << " (valid corr " << r.valid_corr[r.best_layer - 1] << ")\n";
  std::cout << run.string() << '\n';
  return kExitOk;
}

// analyze -------------------------------------------------------------------

struct AnalyzeOptions {
  std::string archive;
  std::vector<std::string> checkpoints;
  std::string split = "test";
  std::string out = ".";
};

int run_analyze(const AnalyzeOptions& o) {
  const Split split = split_from(o.split);
  const FeatureArchive archive = FeatureArchive::open(o.archive);
  std::vector<Checkpoint> cks;
  for (const auto& path : o.checkpoints) {
    cks.push_back(load_checkpoint(path));
    check_compatible(cks.back().config, archive);
  }
  std::vector<VarianceReport> rows;
  std::vector<double> labels;
  std::vector<std::string> videos;
  for (const auto& rec : archive.records()) {
    if (rec.split != split) continue;
    labels.push_back(rec.label);
    videos.push_back(rec.video_id);
  }
  if (labels.empty()) throw DataError("split " + o.split + " has no clips");
  rows.push_back(variance_report(labels, videos, "ground_truth"));
  std::set<std::string> tags{"ground_truth"};
  for (std::size_t i = 0; i < cks.size(); ++i) {
    auto& ck = cks[i];
    const Dataset ds = Dataset::load(archive, split, ck.config.modalities);
    const Predictions p = predict(ds, ck.params, ck.config);
    std::string tag = modality_list_str(ck.config.modalities);
    if (!tags.insert(tag).second) {
      tag += "@" + fs::path(o.checkpoints[i]).stem().string();
      tags.insert(tag);
    }
    rows.push_back(variance_report(p.values, p.video_ids, tag));
  }
  const fs::path out(o.out);
  fs::create_directories(out);
  write_variance_csv(out / "variance.csv", rows);
  for (const auto& r : rows) {
    std::cerr << r.tag << ": total " << r.total_var << ", intra " << r.intra_var << '\n';
  }
  std::cout << (out / "variance.csv").string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Late-fusion multimodal sentiment regression over frozen-encoder features."};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_config("--config", "", "Flat key=value file of option defaults; flags win")
      ->check(CLI::ExistingFile);
  app.allow_config_extras(false);
  auto flat = std::make_shared<FlatConfig>();
  if (argc > 1) flat->section = argv[1];
  app.config_formatter(flat);

  SynthOptions synth;
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic archive with a planted signal");
  cmd_synth->add_option("--out", synth.out, "Archive root directory")->required();
  cmd_synth->add_option("--train", synth.train, "Training clips")->capture_default_str();
  cmd_synth->add_option("--valid", synth.valid, "Validation clips")->capture_default_str();
  cmd_synth->add_option("--test", synth.test, "Test clips")->capture_default_str();
  cmd_synth->add_option("--layers", synth.layers, "Encoder layers stored per clip")
      ->capture_default_str();
  cmd_synth->add_option("--dims", synth.dims, "Feature width, one value or visual,acoustic,linguistic")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->capture_default_str();
  cmd_synth->add_option("--min-frames", synth.min_frames, "Shortest clip")->capture_default_str();
  cmd_synth->add_option("--max-frames", synth.max_frames, "Longest clip")->capture_default_str();
  cmd_synth->add_option("--modalities", synth.modalities, "Modalities to generate")
      ->capture_default_str();
  cmd_synth->add_option("--informative", synth.informative,
                        "Modalities carrying the label signal, or 'none'")
      ->capture_default_str();
  cmd_synth->add_option("--noise-std", synth.noise_std, "Per-element Gaussian noise")
      ->capture_default_str();
  cmd_synth->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  cmd_synth->add_option("--clips-per-video", synth.clips_per_video, "Clips sharing a video id")
      ->capture_default_str();
  cmd_synth->add_flag("--force", synth.force, "Overwrite an existing archive");
  cmd_synth->fallthrough();

  RunOptions train;
  auto* cmd_train = app.add_subcommand("train", "Train one model per seed and report test metrics");
  cmd_train->add_option("--archive", train.archive, "Feature archive root")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd_train->add_option("--out", train.out, "Directory receiving the run directory")
      ->capture_default_str();
  train.model.add_to(cmd_train, true);
  train.train.add_to(cmd_train);
  cmd_train->fallthrough();

  EvalOptions eval;
  auto* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpoint and export gate weights");
  cmd_eval->add_option("--archive", eval.archive, "Feature archive root")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd_eval->add_option("--checkpoint", eval.checkpoint, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_eval->add_option("--split", eval.split, "Split to evaluate")
      ->check(CLI::IsMember({"train", "valid", "test"}))
      ->capture_default_str();
  cmd_eval->add_option("--out", eval.out,
                       "Output directory (default: eval_<checkpoint>_<split> next to the checkpoint)");
  cmd_eval->add_option("--bins", eval.bins, "Gate histogram bins")->capture_default_str();
  cmd_eval->fallthrough();

  SweepOptions sweep;
  auto* cmd_sweep = app.add_subcommand("sweep", "Train a unimodal model per encoder layer");
  cmd_sweep->add_option("--archive", sweep.run.archive, "Feature archive root")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd_sweep->add_option("--modality", sweep.modality, "Modality to sweep")->required();
  cmd_sweep->add_option("--out", sweep.run.out, "Directory receiving the run directory")
      ->capture_default_str();
  sweep.run.model.add_to(cmd_sweep, false);
  sweep.run.train.add_to(cmd_sweep);
  cmd_sweep->fallthrough();

  AnalyzeOptions analyze;
  auto* cmd_analyze =
      app.add_subcommand("analyze", "Total and intra-video variance of predictions");
  cmd_analyze->add_option("--archive", analyze.archive, "Feature archive root")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd_analyze->add_option("--checkpoint", analyze.checkpoints,
                          "Checkpoint to analyze; repeat for several")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->check(CLI::ExistingFile);
  cmd_analyze->add_option("--split", analyze.split, "Split to analyze")
      ->check(CLI::IsMember({"train", "valid", "test"}))
      ->capture_default_str();
  cmd_analyze->add_option("--out", analyze.out, "Output directory")->capture_default_str();
  cmd_analyze->fallthrough();

  for (CLI::App* sub : app.get_subcommands({})) {
    sub->footer("Any option can also come from --config <file> (key=value lines); flags win.");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (cmd_synth->parsed()) return run_synth(synth);
    if (cmd_train->parsed()) return run_train(train);
    if (cmd_eval->parsed()) return run_eval(eval);
    if (cmd_sweep->parsed()) return run_sweep(sweep);
    if (cmd_analyze->parsed()) return run_analyze(analyze);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
