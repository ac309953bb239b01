// tools/cli.cc

// Copyright 2026  tsb authors

// See the top-level COPYING file for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "tsb/analysis.h"
#include "tsb/checkpoint.h"
#include "tsb/errors.h"
#include "tsb/eval.h"
#include "tsb/manifest.h"
#include "tsb/model.h"
#include "tsb/parallel.h"
#include "tsb/toy_corpus.h"
#include "tsb/trainer.h"
#include "tsb/upstream.h"

namespace tsb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T Get(const json& section, const std::string& where, const std::string& key) {
  try {
    return section.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key '" + where + key + "' has the wrong type");
  }
}

json DefaultSimulate() {
  return {{"corpus_dir", ""},       {"noise_dir", ""},       {"out", ""},
          {"n_mixtures", 0},        {"mode", "sparse"},      {"overlap_min", 0.0},
          {"overlap_max", 0.4},     {"overlap_conditions", json::array()},
          {"snr_min", 0.0},         {"snr_max", 15.0},       {"no_loop", false},
          {"min_enroll_sec", 0.0}};
}

json DefaultSynth() {
  return {{"out", ""},        {"speakers", 4},     {"utterances", 4},      {"words", 2},
          {"seconds", 0.0},   {"noise_files", 0},  {"noise_seconds", 4.0}};
}

// Overlays `patch` onto the keys of `defaults`, rejecting keys it lacks.
json MergeSection(json defaults, const json& patch, const std::string& name) {
  if (!patch.is_object()) throw UsageError("config section '" + name + "' must be an object");
  for (const auto& [k, v] : patch.items()) {
    if (!defaults.contains(k)) throw UsageError("unknown config key '" + name + "." + k + "'");
    if (defaults[k].is_number() && !v.is_number())
      throw UsageError("config key '" + name + "." + k + "' has the wrong type");
    if (!defaults[k].is_number() && defaults[k].type() != v.type())
      throw UsageError("config key '" + name + "." + k + "' has the wrong type");
    defaults[k] = v;
  }
  return defaults;
}

SimulationConfig SimulationFromJson(const json& s) {
  SimulationConfig c;
  c.corpus_dir = Get<std::string>(s, "simulate.", "corpus_dir");
  const auto noise = Get<std::string>(s, "simulate.", "noise_dir");
  if (!noise.empty()) c.noise_dir = noise;
  c.out_dir = Get<std::string>(s, "simulate.", "out");
  c.n_mixtures = Get<int>(s, "simulate.", "n_mixtures");
  c.mode = ParseMixMode(Get<std::string>(s, "simulate.", "mode"));
  c.overlap_min = Get<double>(s, "simulate.", "overlap_min");
  c.overlap_max = Get<double>(s, "simulate.", "overlap_max");
  c.overlap_conditions = Get<std::vector<double>>(s, "simulate.", "overlap_conditions");
  c.snr_min = Get<double>(s, "simulate.", "snr_min");
  c.snr_max = Get<double>(s, "simulate.", "snr_max");
  c.no_loop = Get<bool>(s, "simulate.", "no_loop");
  c.min_enroll_sec = Get<double>(s, "simulate.", "min_enroll_sec");
  return c;
}

ToyCorpusConfig SynthFromJson(const json& s) {
  ToyCorpusConfig c;
  c.out_dir = Get<std::string>(s, "synth.", "out");
  c.speakers = Get<int>(s, "synth.", "speakers");
  c.utterances_per_speaker = Get<int>(s, "synth.", "utterances");
  c.words_per_utterance = Get<int>(s, "synth.", "words");
  c.utterance_seconds = Get<double>(s, "synth.", "seconds");
  c.noise_files = Get<int>(s, "synth.", "noise_files");
  c.noise_seconds = Get<double>(s, "synth.", "noise_seconds");
  return c;
}

json ReadJsonFile(const fs::path& path, bool usage) {
  std::ifstream is(path);
  if (!is) {
    const std::string msg = "cannot open " + path.string();
    if (usage) throw UsageError(msg);
    throw DataError(msg);
  }
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    const std::string msg = path.string() + ": invalid JSON: " + e.what();
    if (usage) throw UsageError(msg);
    throw DataError(msg);
  }
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw DataError("write failed for " + path.string());
}

// Values parsed from the command line; `set` tells whether a flag was given.
struct Flag {
  CLI::Option* opt = nullptr;
  bool set() const { return opt != nullptr && opt->count() > 0; }
};

fs::path FeaturePath(const fs::path& dir, const std::string& id, const char* role) {
  return dir / (id + "." + role + ".tsfb");
}

std::shared_ptr<const LayerStack> LoadStack(const fs::path& path, const UpstreamConfig& up,
                                            std::size_t samples) {
  auto stack = std::make_shared<LayerStack>(ReadFeatures(path));
  if (stack->NumLayers() != up.layers + 1 || stack->Dim() != up.dim)
    throw DataError(path.string() + ": feature shape " + std::to_string(stack->NumLayers()) + "x" +
                    std::to_string(stack->Dim()) + " does not match the model upstream (" +
                    std::to_string(up.layers + 1) + " layers of dim " + std::to_string(up.dim) +
                    ")");
  const auto frames = static_cast<Eigen::Index>((samples + kFrameStride - 1) / kFrameStride);
  if (stack->Frames() != frames)
    throw DataError(path.string() + ": " + std::to_string(stack->Frames()) +
                    " frames, audio needs " + std::to_string(frames));
  return stack;
}

std::vector<Example> LoadExamples(const fs::path& manifest_path, bool need_tokens,
                                  const std::string& features_dir, const UpstreamConfig& up) {
  const Manifest manifest = ReadManifest(manifest_path);
  std::vector<Example> out;
  out.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    Example ex = MakeExample(manifest, r, need_tokens);
    if (!features_dir.empty()) {
      ex.mix_stack = LoadStack(FeaturePath(features_dir, r.id, "mix"), up, ex.mixture.size());
      ex.enroll_stack =
          LoadStack(FeaturePath(features_dir, r.id, "enroll"), up, ex.enrollment.size());
    }
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw DataError(manifest_path.string() + ": manifest has no records");
  return out;
}

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}
  int Run(const std::vector<std::string>& args);

 private:
  void Setup(CLI::App* app);
  void LoadConfig();
  json Stamp() const { return {{"config_hash", hash_}, {"seed", effective_["seed"]}}; }
  void WriteRunFile(const fs::path& path, const std::string& command) const;

  void Simulate();
  void Synth();
  void FeaturesExport();
  void FeaturesImport();
  void Train();
  void Eval();
  void AnalyzeWeights();
  void AnalyzeCorr();

  std::ostream& out_;
  std::ostream& err_;
  json effective_;
  std::string hash_;

  // Global.
  std::string config_path_, log_level_;
  std::uint64_t seed_ = 0;
  int threads_ = 1;
  bool deterministic_ = false;
  Flag f_seed_, f_threads_, f_det_, f_log_;

  // simulate
  std::string sim_corpus_, sim_noise_, sim_out_, sim_mode_;
  int sim_n_ = 0;
  double sim_omin_ = 0, sim_omax_ = 0, sim_snr_min_ = 0, sim_snr_max_ = 0, sim_enroll_ = 0;
  std::vector<double> sim_conditions_;
  bool sim_no_loop_ = false;
  Flag f_sim_corpus_, f_sim_noise_, f_sim_out_, f_sim_mode_, f_sim_n_, f_sim_omin_, f_sim_omax_,
      f_sim_snr_min_, f_sim_snr_max_, f_sim_enroll_, f_sim_cond_, f_sim_no_loop_;

  // synth-corpus
  std::string syn_out_;
  int syn_speakers_ = 0, syn_utts_ = 0, syn_words_ = 0, syn_noise_ = 0;
  double syn_seconds_ = 0, syn_noise_seconds_ = 0;
  Flag f_syn_out_, f_syn_speakers_, f_syn_utts_, f_syn_words_, f_syn_noise_, f_syn_seconds_,
      f_syn_noise_seconds_;

  // features
  std::string fx_manifest_, fx_out_, fx_ckpt_, fi_manifest_, fi_dir_;
  std::vector<std::string> fi_files_;

  // train
  std::string tr_task_, tr_manifest_, tr_out_, tr_features_, tr_resume_, tr_schedule_;
  int tr_steps_ = 0, tr_batch_ = 0, tr_warmup_ = 0, tr_ckpt_every_ = 0;
  double tr_lr_ = 0, tr_alpha_ = 0;
  bool tr_finetune_ = false;
  Flag f_tr_task_, f_tr_steps_, f_tr_batch_, f_tr_warmup_, f_tr_schedule_, f_tr_ckpt_every_, f_tr_lr_,
      f_tr_alpha_, f_tr_finetune_;

  // eval
  std::string ev_task_, ev_manifest_, ev_ckpt_, ev_report_, ev_features_;
  bool ev_oracle_ = false;

  // analyze
  std::string aw_ckpt_, aw_out_, ac_table_, ac_out_;

  std::function<void()> action_;
};

void Cli::Setup(CLI::App* app) {
  app->require_subcommand(1);
  app->fallthrough();
  app->add_option("--config", config_path_, "JSON config file (flags override its values)");
  f_seed_.opt = app->add_option("--seed", seed_, "Master seed");
  f_threads_.opt = app->add_option("--threads", threads_, "Worker threads")->check(CLI::PositiveNumber);
  f_det_.opt = app->add_flag("--deterministic", deterministic_,
                             "Reduce gradients over a fixed chunking independent of --threads");
  f_log_.opt = app->add_option("--log-level", log_level_, "trace, debug, info, warn, error or off");

  auto* sim = app->add_subcommand("simulate", "Generate two-speaker mixtures and a manifest");
  f_sim_corpus_.opt = sim->add_option("--corpus-dir", sim_corpus_, "Directory of speaker WAVs");
  f_sim_noise_.opt = sim->add_option("--noise-dir", sim_noise_, "Directory of noise WAVs (omit for clean)");
  f_sim_out_.opt = sim->add_option("--out", sim_out_, "Output directory");
  f_sim_n_.opt = sim->add_option("--n-mixtures", sim_n_, "Number of mixtures");
  f_sim_mode_.opt = sim->add_option("--mode", sim_mode_, "min, max or sparse");
  f_sim_omin_.opt = sim->add_option("--overlap-min", sim_omin_, "Lowest overlap ratio");
  f_sim_omax_.opt = sim->add_option("--overlap-max", sim_omax_, "Highest overlap ratio");
  f_sim_cond_.opt = sim->add_option("--overlap-conditions", sim_conditions_,
                                    "Cycle through these ratios instead of drawing uniformly");
  f_sim_snr_min_.opt = sim->add_option("--snr-min", sim_snr_min_, "Lowest noise SNR (dB)");
  f_sim_snr_max_.opt = sim->add_option("--snr-max", sim_snr_max_, "Highest noise SNR (dB)");
  f_sim_no_loop_.opt = sim->add_flag("--no-loop", sim_no_loop_, "Never loop short noise files");
  f_sim_enroll_.opt = sim->add_option("--min-enroll-sec", sim_enroll_, "Shortest enrollment (s)");
  sim->callback([this] { action_ = [this] { Simulate(); }; });

  auto* syn = app->add_subcommand("synth-corpus", "Write a synthetic multi-speaker corpus");
  f_syn_out_.opt = syn->add_option("--out", syn_out_, "Output directory");
  f_syn_speakers_.opt = syn->add_option("--speakers", syn_speakers_, "Number of speakers");
  f_syn_utts_.opt = syn->add_option("--utterances", syn_utts_, "Utterances per speaker");
  f_syn_words_.opt = syn->add_option("--words", syn_words_, "Words per utterance");
  f_syn_seconds_.opt = syn->add_option("--seconds", syn_seconds_, "Utterance duration (0: 80 ms per letter)");
  f_syn_noise_.opt = syn->add_option("--noise-files", syn_noise_, "Noise files written to <out>_noise");
  f_syn_noise_seconds_.opt = syn->add_option("--noise-seconds", syn_noise_seconds_, "Noise duration (s)");
  syn->callback([this] { action_ = [this] { Synth(); }; });

  auto* feat = app->add_subcommand("features", "Export or import TSFB1 upstream features");
  feat->require_subcommand(1);
  auto* fx = feat->add_subcommand("export", "Write <id>.mix.tsfb and <id>.enroll.tsfb per record");
  fx->add_option("--manifest", fx_manifest_, "Manifest")->required();
  fx->add_option("--out", fx_out_, "Output directory")->required();
  fx->add_option("--ckpt", fx_ckpt_, "Take the upstream from this checkpoint");
  fx->callback([this] { action_ = [this] { FeaturesExport(); }; });
  auto* fi = feat->add_subcommand("import", "Validate feature files");
  fi->add_option("files", fi_files_, "TSFB1 files");
  fi->add_option("--manifest", fi_manifest_, "Check the files of every record");
  fi->add_option("--features-dir", fi_dir_, "Directory written by features export");
  fi->callback([this] { action_ = [this] { FeaturesImport(); }; });

  auto* tr = app->add_subcommand("train", "Train a task model");
  f_tr_task_.opt = tr->add_option("--task", tr_task_, "tse, pse, pvad, tsasr, tse+tsasr or pse+pvad");
  tr->add_option("--manifest", tr_manifest_, "Training manifest")->required();
  tr->add_option("--out", tr_out_, "Output directory")->required();
  tr->add_option("--features-dir", tr_features_, "Use imported features instead of the upstream");
  tr->add_option("--resume", tr_resume_, "Continue from a checkpoint");
  f_tr_steps_.opt = tr->add_option("--steps", tr_steps_, "Total number of updates");
  f_tr_batch_.opt = tr->add_option("--batch", tr_batch_, "Batch size");
  f_tr_lr_.opt = tr->add_option("--lr", tr_lr_, "Peak learning rate");
  f_tr_warmup_.opt = tr->add_option("--warmup", tr_warmup_, "Linear warmup steps");
  f_tr_schedule_.opt = tr->add_option("--schedule", tr_schedule_, "Learning rate after warmup: constant or cosine");
  f_tr_alpha_.opt = tr->add_option("--alpha", tr_alpha_, "Primary loss weight of joint tasks");
  f_tr_ckpt_every_.opt = tr->add_option("--checkpoint-every", tr_ckpt_every_, "Checkpoint period (0: final only)");
  f_tr_finetune_.opt = tr->add_flag("--finetune-upstream", tr_finetune_, "Update the upstream too");
  tr->callback([this] { action_ = [this] { Train(); }; });

  auto* ev = app->add_subcommand("eval", "Score a model and write a report");
  ev->add_option("--task", ev_task_, "tse, pse, pvad or tsasr")->required();
  ev->add_option("--manifest", ev_manifest_, "Evaluation manifest")->required();
  ev->add_option("--ckpt", ev_ckpt_, "Model checkpoint");
  ev->add_flag("--oracle", ev_oracle_, "Score reference outputs instead of a model");
  ev->add_option("--report", ev_report_, "Report JSON")->required();
  ev->add_option("--features-dir", ev_features_, "Use imported features instead of the upstream");
  ev->callback([this] { action_ = [this] { Eval(); }; });

  auto* an = app->add_subcommand("analyze", "Layer weights and cross-task correlation");
  an->require_subcommand(1);
  auto* aw = an->add_subcommand("weights", "Export normalized layer weights");
  aw->add_option("--ckpt", aw_ckpt_, "Checkpoint")->required();
  aw->add_option("--out", aw_out_, "Output .csv or .svg")->required();
  aw->callback([this] { action_ = [this] { AnalyzeWeights(); }; });
  auto* ac = an->add_subcommand("corr", "Spearman correlation matrix of a score table");
  ac->add_option("--table", ac_table_, "scores.csv")->required();
  ac->add_option("--out", ac_out_, "matrix.json")->required();
  ac->callback([this] { action_ = [this] { AnalyzeCorr(); }; });
}

void Cli::LoadConfig() {
  json file = json::object();
  if (!config_path_.empty()) file = ReadJsonFile(config_path_, true);
  if (!file.is_object()) throw UsageError(config_path_ + ": config must be a JSON object");
  json& top = file;
  if (f_seed_.set()) top["seed"] = seed_;
  if (f_threads_.set()) top["threads"] = threads_;
  if (f_det_.set()) top["deterministic"] = deterministic_;
  if (f_log_.set()) top["log_level"] = log_level_;

  auto overlay = [](json& j, const char* section, const char* key, const Flag& f, auto value) {
    if (!f.set()) return;
    if (!j.contains(section)) j[section] = json::object();
    if (!j[section].is_object()) throw UsageError(std::string("config section '") + section + "' must be an object");
    j[section][key] = value;
  };
  overlay(top, "simulate", "corpus_dir", f_sim_corpus_, sim_corpus_);
  overlay(top, "simulate", "noise_dir", f_sim_noise_, sim_noise_);
  overlay(top, "simulate", "out", f_sim_out_, sim_out_);
  overlay(top, "simulate", "n_mixtures", f_sim_n_, sim_n_);
  overlay(top, "simulate", "mode", f_sim_mode_, sim_mode_);
  overlay(top, "simulate", "overlap_min", f_sim_omin_, sim_omin_);
  overlay(top, "simulate", "overlap_max", f_sim_omax_, sim_omax_);
  overlay(top, "simulate", "overlap_conditions", f_sim_cond_, sim_conditions_);
  overlay(top, "simulate", "snr_min", f_sim_snr_min_, sim_snr_min_);
  overlay(top, "simulate", "snr_max", f_sim_snr_max_, sim_snr_max_);
  overlay(top, "simulate", "no_loop", f_sim_no_loop_, sim_no_loop_);
  overlay(top, "simulate", "min_enroll_sec", f_sim_enroll_, sim_enroll_);
  overlay(top, "synth", "out", f_syn_out_, syn_out_);
  overlay(top, "synth", "speakers", f_syn_speakers_, syn_speakers_);
  overlay(top, "synth", "utterances", f_syn_utts_, syn_utts_);
  overlay(top, "synth", "words", f_syn_words_, syn_words_);
  overlay(top, "synth", "seconds", f_syn_seconds_, syn_seconds_);
  overlay(top, "synth", "noise_files", f_syn_noise_, syn_noise_);
  overlay(top, "synth", "noise_seconds", f_syn_noise_seconds_, syn_noise_seconds_);
  overlay(top, "train", "task", f_tr_task_, tr_task_);
  overlay(top, "train", "steps", f_tr_steps_, tr_steps_);
  overlay(top, "train", "batch", f_tr_batch_, tr_batch_);
  overlay(top, "train", "lr", f_tr_lr_, tr_lr_);
  overlay(top, "train", "warmup", f_tr_warmup_, tr_warmup_);
  overlay(top, "train", "schedule", f_tr_schedule_, tr_schedule_);
  overlay(top, "train", "alpha", f_tr_alpha_, tr_alpha_);
  overlay(top, "train", "checkpoint_every", f_tr_ckpt_every_, tr_ckpt_every_);
  if (f_tr_finetune_.set()) overlay(top, "train", "freeze_upstream", f_tr_finetune_, !tr_finetune_);

  effective_ = EffectiveConfig(top);
  hash_ = ConfigHash(effective_);
}

void Cli::WriteRunFile(const fs::path& path, const std::string& command) const {
  json run = Stamp();
  run["command"] = command;
  run["config"] = effective_;
  WriteText(path, run.dump(2) + "\n");
}

void Cli::Simulate() {
  SimulationConfig c = SimulationFromJson(effective_["simulate"]);
  if (c.corpus_dir.empty()) throw UsageError("simulate needs --corpus-dir");
  if (c.out_dir.empty()) throw UsageError("simulate needs --out");
  if (c.n_mixtures < 1) throw UsageError("simulate needs --n-mixtures of at least 1");
  c.seed = effective_["seed"].get<std::uint64_t>();
  c.threads = effective_["threads"].get<int>();
  spdlog::info("simulating {} {} mixtures from {}", c.n_mixtures, ToString(c.mode), c.corpus_dir.string());
  const auto records = BuildCorpus(c);
  WriteRunFile(c.out_dir / "run.json", "simulate");
  out_ << "wrote " << records.size() << " mixtures to " << (c.out_dir / "manifest.jsonl").string()
       << " (config " << hash_ << ")\n";
}

void Cli::Synth() {
  ToyCorpusConfig c = SynthFromJson(effective_["synth"]);
  if (c.out_dir.empty()) throw UsageError("synth-corpus needs --out");
  c.seed = effective_["seed"].get<std::uint64_t>();
  const ToyCorpusResult r = WriteToyCorpus(c);
  WriteRunFile(c.out_dir / "run.json", "synth-corpus");
  out_ << "wrote " << r.utterances.size() << " utterances to " << c.out_dir.string();
  if (!r.noise_dir.empty()) out_ << " and " << c.noise_files << " noise files to " << r.noise_dir.string();
  out_ << "\n";
}

void Cli::FeaturesExport() {
  std::unique_ptr<TaskModel> model;
  if (!fx_ckpt_.empty()) {
    model = LoadModel(LoadCheckpoint(fx_ckpt_));
  } else {
    const ModelConfig mc = ModelConfigFromJson(effective_["model"]);
    model = std::make_unique<TaskModel>(Task::kTse, mc);
  }
  const Manifest manifest = ReadManifest(fx_manifest_);
  fs::create_directories(fx_out_);
  const int threads = effective_["threads"].get<int>();
  ParallelFor(manifest.records.size(), threads, [&](std::size_t i) {
    const auto& r = manifest.records[i];
    WriteFeatures(FeaturePath(fx_out_, r.id, "mix"), model->Extract(ReadWav(manifest.Resolve(r.mixture))));
    WriteFeatures(FeaturePath(fx_out_, r.id, "enroll"),
                  model->Extract(ReadWav(manifest.Resolve(r.enrollment))));
  });
  WriteRunFile(fs::path(fx_out_) / "run.json", "features export");
  out_ << "exported features of " << manifest.records.size() << " records to " << fx_out_ << "\n";
}

void Cli::FeaturesImport() {
  if (fi_files_.empty() && fi_manifest_.empty())
    throw UsageError("features import needs feature files or --manifest with --features-dir");
  for (const auto& f : fi_files_) {
    const LayerStack s = ReadFeatures(f);
    out_ << f << ": " << s.NumLayers() << " layers, " << s.Frames() << " frames, dim " << s.Dim() << "\n";
  }
  if (!fi_manifest_.empty()) {
    if (fi_dir_.empty()) throw UsageError("features import --manifest needs --features-dir");
    const ModelConfig mc = ModelConfigFromJson(effective_["model"]);
    const auto examples = LoadExamples(fi_manifest_, false, fi_dir_, mc.upstream);
    out_ << "validated features of " << examples.size() << " records in " << fi_dir_ << "\n";
  }
}

void Cli::Train() {
  TrainConfig tc = TrainConfigFromJson(effective_["train"]);
  tc.seed = effective_["seed"].get<std::uint64_t>();
  tc.threads = effective_["threads"].get<int>();
  tc.deterministic = effective_["deterministic"].get<bool>();
  const ModelConfig mc = ModelConfigFromJson(effective_["model"]);
  if (!tc.freeze_upstream && !tr_features_.empty())
    throw UsageError("--finetune-upstream cannot train from imported features");

  auto model = std::make_unique<TaskModel>(tc.task, mc);
  std::vector<Example> data =
      LoadExamples(tr_manifest_, Uses(tc.task, SubTask::kTsasr), tr_features_, mc.upstream);
  Trainer trainer(model.get(), tc, std::move(data));
  if (!tr_resume_.empty()) {
    const Checkpoint ckpt = LoadCheckpoint(tr_resume_);
    if (ckpt.meta.value("task", "") != ToString(tc.task) || ckpt.meta.value("model", json()) != ToJson(mc))
      throw UsageError(tr_resume_ + ": checkpoint was written for a different task or model config");
    trainer.Restore(ckpt);
    spdlog::info("resumed from {} at step {}", tr_resume_, trainer.step());
  }

  const fs::path out_dir = tr_out_;
  fs::create_directories(out_dir);
  WriteRunFile(out_dir / "run.json", "train");
  const fs::path loss_path = out_dir / "loss.csv";
  std::ofstream loss(loss_path, tr_resume_.empty() ? std::ios::trunc : std::ios::app);
  if (!loss) throw DataError("cannot open " + loss_path.string() + " for writing");
  if (tr_resume_.empty()) loss << "step,loss_i,loss_j,total\n";
  loss.precision(17);

  const json stamp = Stamp();
  const int report_every = std::max(1, tc.steps / 20);
  spdlog::info("training {} for {} steps on {} examples (config {})", ToString(tc.task), tc.steps,
               trainer.data().size(), hash_);
  trainer.Run([&](const StepRecord& r) {
    loss << r.step << ',' << r.loss_i << ',' << r.loss_j << ',' << r.total << '\n';
    if (r.step % report_every == 0 || r.step == tc.steps)
      spdlog::info("step {} loss {:.6g} (i {:.6g}, j {:.6g}) grad norm {:.4g} lr {:.3g}", r.step,
                   r.total, r.loss_i, r.loss_j, r.grad_norm, r.lr);
    if (tc.checkpoint_every > 0 && r.step % tc.checkpoint_every == 0)
      trainer.Save(out_dir / ("step-" + std::to_string(r.step) + ".ckpt"), stamp);
  });
  loss.close();
  const fs::path final_path = out_dir / "model.ckpt";
  trainer.Save(final_path, stamp);
  out_ << "wrote " << final_path.string() << " after " << trainer.step() << " steps (config " << hash_
       << ")\n";
}

void Cli::Eval() {
  const SubTask sub = ParseSubTask(ev_task_);
  if (ev_oracle_ == !ev_ckpt_.empty()) throw UsageError("eval needs exactly one of --ckpt and --oracle");
  std::unique_ptr<TaskModel> model;
  EvalOptions options;
  options.threads = effective_["threads"].get<int>();
  UpstreamConfig up = ModelConfigFromJson(effective_["model"]).upstream;
  if (!ev_ckpt_.empty()) {
    const Checkpoint ckpt = LoadCheckpoint(ev_ckpt_);
    model = LoadModel(ckpt);
    if (!Uses(model->task(), sub))
      throw UsageError("checkpoint task " + ToString(model->task()) + " has no " + ToString(sub) + " head");
    up = model->config().upstream;
    options.checkpoint_id = HexHash(ckpt.content_hash);
  } else {
    options.checkpoint_id = "oracle";
  }
  options.metadata = Stamp();
  const auto examples = LoadExamples(ev_manifest_, sub == SubTask::kTsasr, ev_features_, up);
  spdlog::info("evaluating {} on {} examples", ToString(sub), examples.size());
  std::unique_ptr<Predictor> predictor;
  if (model) predictor = std::make_unique<ModelPredictor>(model.get());
  else predictor = std::make_unique<OraclePredictor>();
  const json report = Evaluate(sub, examples, *predictor, options);
  ValidateReport(report);
  WriteText(ev_report_, report.dump(2) + "\n");
  const json& overall = report["aggregates"]["overall"];
  out_ << "wrote " << ev_report_ << ": " << overall.dump() << "\n";
}

void Cli::AnalyzeWeights() {
  const auto weights = ExportLayerWeights(LoadCheckpoint(aw_ckpt_));
  const fs::path path = aw_out_;
  if (path.extension() == ".csv") WriteLayerWeightsCsv(path, weights);
  else if (path.extension() == ".svg") WriteLayerWeightsSvg(path, weights);
  else throw UsageError("--out must end in .csv or .svg: " + aw_out_);
  WriteRunFile(path.string() + ".run.json", "analyze weights");
  out_ << "wrote " << path.string() << "\n";
}

void Cli::AnalyzeCorr() {
  const TaskScoreTable table = ReadScoreTable(ac_table_);
  json doc = ComputeCorrelationMatrix(table).ToJson();
  doc["config_hash"] = hash_;
  doc["seed"] = effective_["seed"];
  WriteText(ac_out_, doc.dump(2) + "\n");
  out_ << "wrote " << ac_out_ << " (" << table.columns.size() << " tasks, " << table.models.size()
       << " models)\n";
}

int Cli::Run(const std::vector<std::string>& args) {
  CLI::App app{"Target-speaker speech task toolkit", "tsb"};
  Setup(&app);
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.push_back("tsb");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out_, err_);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err_);
  auto logger = std::make_shared<spdlog::logger>("tsb", sink);
  logger->set_pattern("[%H:%M:%S] [%l] %v");
  spdlog::set_default_logger(logger);
  try {
    LoadConfig();
    spdlog::set_level(spdlog::level::from_str(effective_["log_level"].get<std::string>()));
    action_();
    return kExitOk;
  } catch (const UsageError& e) {
    err_ << "tsb: usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err_ << "tsb: numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err_ << "tsb: data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err_ << "tsb: data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace

json EffectiveConfig(const json& file_config) {
  if (!file_config.is_object()) throw UsageError("config must be a JSON object");
  json e = {{"seed", 0},
            {"threads", 1},
            {"deterministic", false},
            {"log_level", "info"},
            {"model", json::object()},
            {"train", json::object()},
            {"simulate", DefaultSimulate()},
            {"synth", DefaultSynth()}};
  json model_patch = json::object(), train_patch = json::object();
  for (const auto& [k, v] : file_config.items()) {
    if (k == "seed") {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
        throw UsageError("config key 'seed' must be a nonnegative integer");
      e[k] = v;
    } else if (k == "threads") {
      if (!v.is_number_integer() || v.get<long>() < 1)
        throw UsageError("config key 'threads' must be a positive integer");
      e[k] = v;
    } else if (k == "deterministic") {
      if (!v.is_boolean()) throw UsageError("config key 'deterministic' must be a boolean");
      e[k] = v;
    } else if (k == "log_level") {
      if (!v.is_string()) throw UsageError("config key 'log_level' must be a string");
      const auto s = v.get<std::string>();
      if (spdlog::level::from_str(s) == spdlog::level::off && s != "off")
        throw UsageError("unknown log level '" + s + "'");
      e[k] = v;
    } else if (k == "model") {
      model_patch = v;
    } else if (k == "train") {
      if (!v.is_object()) throw UsageError("config section 'train' must be an object");
      for (const char* global : {"seed", "threads", "deterministic"}) {
        if (v.contains(global))
          throw UsageError(std::string("config key 'train.") + global + "' belongs at the top level");
      }
      train_patch = v;
    } else if (k == "simulate") {
      e[k] = MergeSection(DefaultSimulate(), v, k);
    } else if (k == "synth") {
      e[k] = MergeSection(DefaultSynth(), v, k);
    } else {
      throw UsageError("unknown config key '" + k + "'");
    }
  }
  ModelConfig mc;
  mc.seed = e["seed"].get<std::uint64_t>();
  mc = ModelConfigFromJson(model_patch, mc);
  e["model"] = ToJson(mc);
  json train = ToJson(TrainConfigFromJson(train_patch));
  for (const char* global : {"seed", "threads", "deterministic"}) train.erase(global);
  e["train"] = train;
  SimulationFromJson(e["simulate"]);
  SynthFromJson(e["synth"]);
  return e;
}

std::string ConfigHash(const json& effective) {
  json copy = effective;
  copy.erase("log_level");
  const std::string text = copy.dump();
  return HexHash(Fnv1a(text.data(), text.size()));
}

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Cli cli(out, err);
  return cli.Run(args);
}

}  // namespace tsb
