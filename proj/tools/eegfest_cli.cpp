#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eegfest/dataset.hpp"
#include "eegfest/errors.hpp"
#include "eegfest/evaluation.hpp"
#include "eegfest/io.hpp"
#include "eegfest/model.hpp"
#include "eegfest/training.hpp"

using namespace eegfest;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string data_dir;
  std::string checkpoint;
  std::string pretrained;
  std::vector<std::size_t> shots;
  std::optional<std::size_t> epochs;
};

RunConfig resolve(const Options& opt) {
  RunConfig cfg = opt.config_path.empty() ? RunConfig{} : load_config(opt.config_path);
  if (opt.seed) {
    cfg.seed = *opt.seed;
    cfg.apply_seed();
  }
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (!opt.data_dir.empty()) cfg.data_dir = opt.data_dir;
  if (!opt.checkpoint.empty()) cfg.checkpoint = opt.checkpoint;
  if (!opt.pretrained.empty()) cfg.pretrained = opt.pretrained;
  if (!opt.shots.empty()) cfg.eval_shots = opt.shots;
  if (opt.epochs) cfg.train.epochs_total = *opt.epochs;
  cfg.validate();
  return cfg;
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

// ---- data -----------------------------------------------------------------

struct Dataset {
  std::vector<EegEpoch> epochs;
  SubjectSplit split;
};

std::string class_dir(const std::optional<ClassLabel>& label) {
  return label ? to_string(*label) : std::string("unlabeled");
}

std::string profile_text(const SpectralProfile& p) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t b = 0; b < p.size(); ++b) os << (b ? ";" : "") << p[b];
  return os.str();
}

// Subjects listed in manifest.csv with split=eval are held out. Without a
// manifest the last third of the driving and of the non-driving subjects are.
SubjectSplit split_from_manifest(const fs::path& dir, const std::vector<EegEpoch>& epochs) {
  SubjectSplit split;
  const fs::path manifest = dir / "manifest.csv";
  if (fs::exists(manifest)) {
    const auto bytes = read_file(manifest);
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::string line;
    std::getline(in, line);
    std::set<std::uint32_t> train, eval;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
      if (cells.size() < 4) throw FormatError(manifest.string() + ": malformed row '" + line + "'");
      const auto subject = static_cast<std::uint32_t>(std::stoul(cells[1]));
      (cells[3] == "eval" ? eval : train).insert(subject);
    }
    split.train.assign(train.begin(), train.end());
    split.eval.assign(eval.begin(), eval.end());
    return split;
  }
  std::set<std::uint32_t> driving, non_driving;
  for (const auto& e : epochs) {
    if (!e.class_label) continue;
    (*e.class_label == ClassLabel::NonDriving ? non_driving : driving).insert(e.subject_id);
  }
  for (const auto* group : {&driving, &non_driving}) {
    const std::vector<std::uint32_t> ids(group->begin(), group->end());
    const std::size_t held = ids.size() / 3;
    split.train.insert(split.train.end(), ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(held));
    split.eval.insert(split.eval.end(), ids.end() - static_cast<std::ptrdiff_t>(held), ids.end());
  }
  return split;
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) {
    SyntheticBenchmark bench = make_benchmark(cfg.bench);
    return {std::move(bench.epochs), std::move(bench.split)};
  }
  Dataset d;
  d.epochs = load_epoch_dir(cfg.data_dir, cfg.bench.sample_rate);
  if (d.epochs.empty()) throw DataError("no epoch files under " + cfg.data_dir);
  d.split = split_from_manifest(cfg.data_dir, d.epochs);
  return d;
}

SplitPools featurized_split(const Dataset& d) {
  return split_subjects(featurize(d.epochs), d.split.train, d.split.eval);
}

// ---- checkpoints -----------------------------------------------------------

std::string echo_for(const RunConfig& cfg, std::size_t steps) {
  return model_echo(cfg.model) + "step=" + std::to_string(steps) + "\nseed=" + std::to_string(cfg.seed) + "\n";
}

ModelParams load_model(const fs::path& path, ModelConfig& model_cfg) {
  const Checkpoint ckpt = load_checkpoint(path);
  model_cfg = model_from_echo(ckpt.config_echo);
  std::size_t channels = 0;
  for (const auto& t : ckpt.tensors)
    if (t.name == "feature.proj.w") channels = t.value.rows();
  if (channels == 0) throw FormatError(path.string() + ": no feature.proj.w tensor");
  ModelParams params = ModelParams::init(channels, model_cfg);
  restore(ckpt, params.named());
  return params;
}

void restore_feature_block(const fs::path& path, FeatureBlockParams& feature) {
  std::vector<NamedParam> named;
  feature.collect("feature", named);
  restore(load_checkpoint(path), named);
}

void write_csv(const fs::path& path, const std::string& text) {
  write_file_atomic(path, text);
  std::cout << "wrote " << path.string() << "\n";
}

// ---- commands --------------------------------------------------------------

void cmd_synth(const RunConfig& cfg) {
  const SyntheticBenchmark bench = make_benchmark(cfg.bench);
  const fs::path root = fs::path(cfg.out_dir) / "data";
  const std::set<std::uint32_t> eval(bench.split.eval.begin(), bench.split.eval.end());
  std::ostringstream manifest;
  manifest << "path,subject,label,split,profile\n";
  std::map<std::uint32_t, std::size_t> counter;
  for (const auto& e : bench.epochs) {
    const std::size_t n = counter[e.subject_id]++;
    char name[32];
    std::snprintf(name, sizeof name, "e%04zu.eege", n);
    char subject[32];
    std::snprintf(subject, sizeof subject, "s%03u", e.subject_id);
    const fs::path rel = fs::path("subjects") / subject / class_dir(e.class_label) / name;
    write_epoch(root / rel, e);
    const SpectralProfile& profile = *e.class_label == ClassLabel::Drowsy      ? cfg.bench.drowsy
                                     : *e.class_label == ClassLabel::NonDrowsy ? cfg.bench.non_drowsy
                                                                               : cfg.bench.non_driving;
    manifest << rel.generic_string() << ',' << e.subject_id << ',' << class_dir(e.class_label) << ','
             << (eval.count(e.subject_id) ? "eval" : "train") << ',' << profile_text(profile) << '\n';
  }
  write_file_atomic(root / "manifest.csv", manifest.str());
  RunConfig echo = cfg;
  echo.out_dir = RunConfig{}.out_dir;
  write_file_atomic(root / "synth.cfg", emit_config(echo));
  std::cout << "wrote " << bench.epochs.size() << " epochs under " << root.string() << "\n";
}

void cmd_features(const RunConfig& cfg) {
  const Dataset d = load_dataset(cfg);
  const SamplePool pool = featurize(d.epochs);
  std::ostringstream os;
  os << std::setprecision(17) << "subject,label";
  const std::size_t c = pool.front().de.channels;
  for (std::size_t b = 0; b < kBandCount; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) os << ",de_b" << b << "_c" << ch;
  os << '\n';
  for (const auto& s : pool) {
    os << s.subject << ',' << class_dir(s.label);
    for (double v : s.de.values) os << ',' << v;
    os << '\n';
  }
  const OutputLayout layout{cfg.out_dir};
  write_csv(layout.reports() / "features.csv", os.str());
}

void cmd_pretrain(const RunConfig& cfg) {
  const SplitPools split = featurized_split(load_dataset(cfg));
  ModelParams init = ModelParams::init(split.train.front().de.channels, cfg.model);
  const std::size_t epochs = cfg.train.pretrain_epochs ? cfg.train.pretrain_epochs : cfg.train.epochs_total;
  const PretrainResult r = pretrain_feature_block(split.train, init.feature, cfg.model, cfg.train, epochs);
  const OutputLayout layout{cfg.out_dir};
  std::vector<NamedParam> named;
  r.feature.collect("feature", named);
  save_checkpoint(layout.checkpoints() / "feature.eegf", capture(named, echo_for(cfg, r.curve.size())));
  write_csv(layout.losscurves() / "pretrain.csv", render([&](std::ostream& os) { write_loss_csv(os, r.curve); }));
  std::cout << "pretraining head accuracy " << r.head_accuracy << "\n";
}

ModelParams train_model(const RunConfig& cfg, const ModelConfig& model_cfg, const SamplePool& train_pool,
                        TrainResult* result) {
  ModelParams params = ModelParams::init(train_pool.front().de.channels, model_cfg);
  if (!cfg.pretrained.empty()) restore_feature_block(cfg.pretrained, params.feature);
  TrainResult r = train_episodic(train_pool, model_cfg, cfg.train, params);
  if (result) *result = std::move(r);
  return params;
}

void cmd_train(const RunConfig& cfg) {
  const SplitPools split = featurized_split(load_dataset(cfg));
  TrainResult r;
  const ModelParams params = train_model(cfg, cfg.model, split.train, &r);
  const OutputLayout layout{cfg.out_dir};
  save_checkpoint(layout.checkpoints() / "model.eegf", capture(params.named(), echo_for(cfg, r.steps)));
  std::cout << "wrote " << (layout.checkpoints() / "model.eegf").string() << " after " << r.steps << " steps\n";
  write_csv(layout.losscurves() / "train.csv", render([&](std::ostream& os) { write_loss_csv(os, r.curve); }));
}

void cmd_eval(const RunConfig& cfg) {
  const OutputLayout layout{cfg.out_dir};
  const fs::path ckpt = cfg.checkpoint.empty() ? layout.checkpoints() / "model.eegf" : fs::path(cfg.checkpoint);
  if (!fs::exists(ckpt)) throw DataError("checkpoint not found: " + ckpt.string());
  ModelConfig model_cfg;
  const ModelParams params = load_model(ckpt, model_cfg);
  const SplitPools split = featurized_split(load_dataset(cfg));
  if (split.eval.empty()) throw DataError("evaluation split is empty");
  if (split.eval.front().de.channels != params.channels())
    throw DimensionError("checkpoint feature.proj.w expects " + std::to_string(params.channels()) +
                         " channels, data has " + std::to_string(split.eval.front().de.channels));
  std::vector<EvalReport> reports;
  for (auto k : cfg.eval_shots) {
    ModelConfig at_k = model_cfg;
    at_k.k_shot = k;
    reports.push_back(run_trials(split.eval, at_k, params, k, cfg.eval_trials, cfg.seed));
    reports.back().config_echo = echo_for(cfg, 0);
  }
  write_csv(layout.reports() / "eval.csv", render([&](std::ostream& os) { write_report_csv(os, reports); }));
  write_report_table(std::cout, reports);
}

void cmd_vigilance(const RunConfig& cfg) {
  std::vector<std::vector<EegEpoch>> subjects;
  if (cfg.data_dir.empty()) {
    subjects = make_vigilance_subjects(cfg.vigilance);
  } else {
    std::map<std::uint32_t, std::vector<EegEpoch>> grouped;
    for (auto& e : load_epoch_dir(cfg.data_dir, cfg.vigilance.sample_rate)) grouped[e.subject_id].push_back(e);
    for (auto& [_, v] : grouped) subjects.push_back(std::move(v));
  }
  std::ostringstream summary, predictions;
  summary << std::setprecision(17) << "subject,fold,pcc,rmse\n";
  predictions << std::setprecision(17) << "subject,fold,index,truth,prediction\n";
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const SamplePool pool = featurize(subjects[s]);
    ModelConfig model_cfg = cfg.model;
    model_cfg.seed = cfg.model.seed + s;
    const VigilanceResult r = train_vigilance_regressor(pool, model_cfg, cfg.train, cfg.vigilance_folds);
    const std::uint32_t id = pool.front().subject;
    for (const auto& f : r.folds) {
      summary << id << ',' << f.fold << ',' << f.pcc << ',' << f.rmse << '\n';
      for (std::size_t i = 0; i < f.test_indices.size(); ++i)
        predictions << id << ',' << f.fold << ',' << f.test_indices[i] << ',' << f.truth[i] << ','
                    << f.prediction[i] << '\n';
    }
    summary << id << ",all," << r.pcc << ',' << r.rmse << '\n';
    std::cout << "subject " << id << ": PCC " << r.pcc << " RMSE " << r.rmse << "\n";
  }
  const OutputLayout layout{cfg.out_dir};
  write_csv(layout.reports() / "vigilance.csv", summary.str());
  write_csv(layout.reports() / "vigilance_predictions.csv", predictions.str());
}

void cmd_ablate(const RunConfig& cfg) {
  const SplitPools split = featurized_split(load_dataset(cfg));
  const ModelFactory factory = [&](const ModelConfig& variant) {
    std::cout << "training variant metric=" << to_string(variant.metric)
              << " similarity=" << variant.use_similarity_block
              << " determination=" << variant.use_determination_block << std::endl;
    return train_model(cfg, variant, split.train, nullptr);
  };
  const AblationResult r = ablation_suite(split.eval, cfg.model, factory, cfg.eval_shots, cfg.eval_trials, cfg.seed);
  const OutputLayout layout{cfg.out_dir};
  for (const AblationTable* t : {&r.metric_non_drowsy, &r.metric_drowsy, &r.determination, &r.similarity}) {
    write_csv(layout.reports() / ("ablation_" + t->name + ".csv"),
              render([&](std::ostream& os) { write_table_csv(os, *t); }));
    write_table_text(std::cout, *t);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot EEG drowsiness detection"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config_path, "Run configuration file (key = value lines)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", opt.seed, "Master seed; component seeds are derived from it");
  app.add_option("--out", opt.out_dir, "Output directory");

  auto data_flag = [&](CLI::App* sub) {
    sub->add_option("--data", opt.data_dir, "Directory of epoch files (default: synthetic benchmark)");
  };
  std::map<std::string, std::function<void(const RunConfig&)>> commands{
      {"synth", cmd_synth},       {"features", cmd_features}, {"pretrain", cmd_pretrain},
      {"train", cmd_train},       {"eval", cmd_eval},         {"vigilance", cmd_vigilance},
      {"ablate", cmd_ablate},
  };
  auto* synth = app.add_subcommand("synth", "Write the synthetic benchmark as epoch files plus a manifest");
  auto* features = app.add_subcommand("features", "Dump differential-entropy features as CSV");
  auto* pretrain = app.add_subcommand("pretrain", "Pretrain the feature block on the 3-class task");
  auto* train = app.add_subcommand("train", "Episodic training of the full model");
  auto* eval = app.add_subcommand("eval", "Cross-subject few-shot evaluation of a checkpoint");
  auto* vigilance = app.add_subcommand("vigilance", "Subject-specific vigilance regression with k-fold CV");
  auto* ablate = app.add_subcommand("ablate", "Metric, determination and similarity ablations");
  (void)synth;
  for (auto* sub : {features, pretrain, train, eval, vigilance, ablate}) data_flag(sub);
  for (auto* sub : {pretrain, train, vigilance, ablate}) sub->add_option("--epochs", opt.epochs, "Training epochs");
  for (auto* sub : {train, ablate})
    sub->add_option("--pretrained", opt.pretrained, "Feature-block checkpoint to start from");
  eval->add_option("--checkpoint", opt.checkpoint, "Model checkpoint (default: <out>/checkpoints/model.eegf)");
  for (auto* sub : {eval, ablate}) sub->add_option("--shots", opt.shots, "Shot levels")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    const RunConfig cfg = resolve(opt);
    OutputLayout{cfg.out_dir}.create();
    commands.at(app.get_subcommands().front()->get_name())(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
