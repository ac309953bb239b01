// tests/acceptance/acceptance_main.cc

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

// Acceptance suite: one PASS/FAIL line per criterion. Arguments select a
// subset by number (e.g. "tsb_acceptance 1 2 10"); no arguments run all.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.h"
#include "gen.h"
#include "grad_suite.h"
#include "oracles.h"
#include "tsb/analysis.h"
#include "tsb/ctc.h"
#include "tsb/errors.h"
#include "tsb/eval.h"
#include "tsb/manifest.h"
#include "tsb/signal_metrics.h"
#include "tsb/trainer.h"

namespace tsb::testing {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void Check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

// Shared overfit data, built on first use.
class OverfitData {
 public:
  const OverfitSet& Get() {
    if (!set_) {
      dir_ = std::make_unique<TempDir>("acceptance");
      set_ = std::make_unique<OverfitSet>(MakeOverfitSet(dir_->path(), true));
    }
    return *set_;
  }

 private:
  std::unique_ptr<TempDir> dir_;
  std::unique_ptr<OverfitSet> set_;
};

OverfitData g_overfit;

TrainConfig OverfitTrainConfig(Task task, int steps, double lr = 3e-3) {
  TrainConfig c;
  c.task = task;
  c.lr = lr;
  c.warmup = 20;
  c.schedule = "cosine";
  c.steps = steps;
  c.batch = 8;
  c.seed = 17;
  c.deterministic = true;
  return c;
}

// ---------------------------------------------------------------------------

Outcome MetricOracles() {
  Outcome o;
  Gen gen(2024);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const auto n = static_cast<std::size_t>(gen.Int(64, 4000));
    const std::vector<double> ref = gen.Normals(n);
    const double gain = gen.Uniform(-2.0, 2.0), noise = std::pow(10.0, gen.Uniform(-3.0, 0.5));
    std::vector<double> est(n);
    for (std::size_t i = 0; i < n; ++i) est[i] = gain * ref[i] + noise * gen.Normal() + gen.Uniform(-0.1, 0.1);
    worst = std::max(worst, std::abs(SiSdr(est, ref) - DirectSiSdr(est, ref)));
  }
  o.Check(worst <= 1e-6, "200 seeded pairs vs direct formula, max |diff| = " + Fmt("%.3g dB", worst));
  const double v = SiSdr(std::vector<double>{1, 1, 0, 1}, std::vector<double>{1, 1, 0, 0});
  o.Check(std::abs(v - (-3.0103)) < 5e-5 && std::abs(v + 10.0 * std::log10(2.0)) < 1e-6,
          "[1,1,0,1] vs [1,1,0,0] = " + Fmt("%.6f dB", v));
  return o;
}

Outcome CtcBruteForce() {
  Outcome o;
  Gen gen(7);
  int instances = 0, mismatches = 0;
  double worst = 0.0;
  for (int frames = 1; frames <= 4; ++frames) {
    for (int vocab = 2; vocab <= 3; ++vocab) {
      std::vector<std::vector<int>> labels = {{}};
      for (int a = 1; a < vocab; ++a) {
        labels.push_back({a});
        for (int b = 1; b < vocab; ++b) labels.push_back({a, b});
      }
      for (const auto& label : labels) {
        for (int draw = 0; draw < 3; ++draw) {
          const Mat logits = gen.Matrix(frames, vocab, 1.5);
          const double expected = EnumeratedCtcProbability(logits, label);
          ++instances;
          if (frames < CtcMinFrames(label)) {
            bool threw = false;
            try {
              CtcLoss(logits, label);
            } catch (const DataError&) {
              threw = true;
            }
            if (!threw || expected != 0.0) ++mismatches;
            continue;
          }
          const double got = std::exp(-CtcLoss(logits, label));
          worst = std::max(worst, std::abs(got - expected));
        }
      }
    }
  }
  o.Check(worst <= 1e-10 && mismatches == 0,
          std::to_string(instances) + " instances, max |p - p_enum| = " + Fmt("%.3g", worst) +
              ", inadmissible mismatches " + std::to_string(mismatches));
  const double p = std::exp(-CtcLoss(Mat::Zero(2, 2), {1}));
  o.Check(std::abs(p - 0.75) <= 1e-15, "T=2 uniform, label [a]: p = " + Fmt("%.17g", p));
  return o;
}

Outcome GradientSuite() {
  Outcome o;
  for (const auto& name : GradCaseNames()) {
    const GradCheckResult r = RunGradCase(name);
    std::ostringstream msg;
    msg << name << ": max rel err " << Fmt("%.2e", r.max_rel_error) << " over " << r.probes << " probes";
    if (r.kinks > 0) msg << " (" << r.kinks << " kinks skipped)";
    if (r.max_rel_error > kGradTolerance) msg << " worst " << r.worst;
    o.Check(r.max_rel_error <= kGradTolerance && r.probes > 0, msg.str());
  }
  return o;
}

Outcome SimulatorFidelity() {
  Outcome o;
  TempDir dir("fidelity");
  SimulationConfig sim;
  sim.corpus_dir = WriteCorpus(dir.path(), 6, 5, 1.2, 99, 2);
  sim.noise_dir = dir.path() / "corpus_noise";
  sim.out_dir = dir.path() / "sim";
  sim.n_mixtures = 500;
  sim.mode = MixMode::kSparse;
  sim.overlap_conditions = {0.0, 0.2, 0.4, 0.6};
  sim.seed = 123;
  BuildCorpus(sim);
  const Manifest m = ReadManifest(sim.out_dir / "manifest.jsonl");

  int ratio_bad = 0, label_bad = 0, oracle_bad = 0, additive_bad = 0;
  double worst_ratio = 0.0, worst_lsb = 0.0;
  for (const auto& r : m.records) {
    const double frame = 320.0 / static_cast<double>(r.mixture_len);
    const double err = std::abs(r.overlap_ratio - r.requested_overlap);
    worst_ratio = std::max(worst_ratio, err / frame);
    if (err > frame) ++ratio_bad;
    if (FrameLabels(r.Plan()) != r.labels) ++label_bad;
    if (LabelsFromOffsets(r.offset_a, r.len_a, r.offset_b, r.len_b, r.mixture_len) != r.labels) ++oracle_bad;

    const MixtureSample s = Resynthesize(m, r);
    const AudioSignal y = ReadWav(m.Resolve(r.mixture));
    const AudioSignal x = ReadWav(m.Resolve(r.target));
    double worst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double noise = s.noise_placed.empty() ? 0.0 : s.noise_placed[i];
      worst = std::max(worst, std::abs(y[i] - s.interferer_placed[i] - noise - x[i]) * 32768.0);
    }
    worst_lsb = std::max(worst_lsb, worst);
    if (worst > 1.0) ++additive_bad;
  }
  o.Check(m.records.size() == 500, std::to_string(m.records.size()) + " mixtures at {0, 0.2, 0.4, 0.6}");
  o.Check(ratio_bad == 0, "realized ratio within one frame, worst " + Fmt("%.3f frames", worst_ratio));
  o.Check(label_bad == 0, "labels re-derived from plans match stored labels (" + std::to_string(label_bad) + " bad)");
  o.Check(oracle_bad == 0, "labels match offset oracle (" + std::to_string(oracle_bad) + " bad)");
  o.Check(additive_bad == 0, "y - i - g*n == x after quantization, worst " + Fmt("%.3f LSB", worst_lsb));
  return o;
}

// Mean of consecutive blocks of the loss curve.
std::vector<double> BlockMeans(const std::vector<StepRecord>& log, int blocks) {
  std::vector<double> out;
  const std::size_t per = log.size() / blocks;
  for (int b = 0; b < blocks; ++b) {
    double acc = 0.0;
    for (std::size_t k = b * per; k < (b + 1) * per; ++k) acc += log[k].total;
    out.push_back(acc / static_cast<double>(per));
  }
  return out;
}

Outcome OverfitTse() {
  Outcome o;
  const OverfitSet& set = g_overfit.Get();
  TaskModel model(Task::kTse, OverfitModelConfig());
  Trainer trainer(&model, OverfitTrainConfig(Task::kTse, 500), set.examples);
  const auto log = trainer.Run();
  double sum = 0.0;
  for (const auto& ex : trainer.data()) {
    const Prediction p = model.Predict(ex, SubTask::kTse);
    sum += SiSdrImprovement(AudioSignal(p.estimate), ex.mixture, ex.target);
  }
  const double mean = sum / static_cast<double>(trainer.data().size());
  o.Check(mean > 5.0, "mean training SI-SDRi " + Fmt("%.2f dB", mean) + " after 500 steps");
  const auto blocks = BlockMeans(log, 10);
  bool monotone = true;
  std::string curve;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b > 0 && blocks[b] > blocks[b - 1]) monotone = false;
    curve += (b ? " " : "") + Fmt("%.2f", blocks[b]);
  }
  o.Check(monotone, "50-step block means non-increasing: " + curve);
  return o;
}

Outcome OverfitPvad() {
  Outcome o;
  const OverfitSet& set = g_overfit.Get();
  TaskModel model(Task::kPvad, OverfitModelConfig());
  Trainer trainer(&model, OverfitTrainConfig(Task::kPvad, 300), set.examples);
  trainer.Run();
  const ModelPredictor predictor(&model);
  const auto report = Evaluate(SubTask::kPvad, trainer.data(), predictor);
  const double m_tss = report["aggregates"]["overall"]["m_tss"].get<double>();
  o.Check(m_tss >= 0.99, "training m.tss " + Fmt("%.4f", m_tss) + " after 300 steps");
  return o;
}

Outcome OverfitTsasr() {
  Outcome o;
  const OverfitSet& set = g_overfit.Get();
  TaskModel model(Task::kTsasr, OverfitModelConfig());
  TrainConfig tc = OverfitTrainConfig(Task::kTsasr, 2000);
  Trainer trainer(&model, tc, set.examples);
  int matched = 0, steps = 0;
  auto count = [&] {
    int m = 0;
    for (const auto& ex : trainer.data()) {
      m += DecodeTokens(model.Predict(ex, SubTask::kTsasr).tokens) == NormalizeTranscript(ex.transcript);
    }
    return m;
  };
  while (trainer.step() < tc.steps) {
    for (int k = 0; k < 50; ++k) trainer.Step();
    steps = trainer.step();
    matched = count();
    if (matched == static_cast<int>(trainer.data().size())) break;
  }
  o.Check(matched == static_cast<int>(trainer.data().size()),
          std::to_string(matched) + "/" + std::to_string(trainer.data().size()) +
              " exact greedy matches after " + std::to_string(steps) + " steps");
  return o;
}

ExampleLoss MeanLoss(const TaskModel& model, const std::vector<Example>& data, double alpha) {
  ExampleLoss acc;
  for (const auto& ex : data) {
    const ExampleLoss l = model.ForwardBackward(ex, alpha, false, nullptr);
    acc.loss_i += l.loss_i / data.size();
    acc.loss_j += l.loss_j / data.size();
  }
  return acc;
}

Outcome MultitaskContract() {
  Outcome o;
  const OverfitSet& set = g_overfit.Get();
  {
    TaskModel single(Task::kTse, OverfitModelConfig());
    TaskModel joint(Task::kTseTsasr, OverfitModelConfig());
    TrainConfig ts = OverfitTrainConfig(Task::kTse, 25);
    TrainConfig tj = OverfitTrainConfig(Task::kTseTsasr, 25);
    tj.alpha = 1.0;
    Trainer a(&single, ts, set.examples), b(&joint, tj, set.examples);
    bool identical = true;
    int first_diff = -1;
    for (int s = 0; s < ts.steps; ++s) {
      const StepRecord ra = a.Step(), rb = b.Step();
      bool same = ra.total == rb.total;
      for (std::size_t i = 0; i < single.store().size(); ++i) {
        const ParamId id = single.store().At(i);
        const Mat& pa = single.store()[id];
        const Mat& pb = joint.store()[joint.store().Get(single.store().Name(id))];
        same = same && pa.size() == pb.size() &&
               std::memcmp(pa.data(), pb.data(), sizeof(Real) * pa.size()) == 0;
      }
      if (!same && identical) first_diff = s + 1;
      identical = identical && same;
    }
    o.Check(identical, "alpha=1 joint run matches single-task TSE bitwise over 25 steps" +
                           (identical ? std::string() : " (first difference at step " + std::to_string(first_diff) + ")"));
  }
  {
    TaskModel joint(Task::kTseTsasr, OverfitModelConfig());
    TrainConfig tj = OverfitTrainConfig(Task::kTseTsasr, 600);
    tj.alpha = 0.5;
    Trainer trainer(&joint, tj, set.examples);
    trainer.Precompute();
    const ExampleLoss before = MeanLoss(joint, trainer.data(), 0.5);
    trainer.Run();
    const ExampleLoss after = MeanLoss(joint, trainer.data(), 0.5);
    auto halved = [](double init, double fin) { return fin <= init - 0.5 * std::abs(init); };
    o.Check(halved(before.loss_i, after.loss_i),
            "alpha=0.5 TSE loss " + Fmt("%.3f", before.loss_i) + " -> " + Fmt("%.3f", after.loss_i));
    o.Check(halved(before.loss_j, after.loss_j),
            "alpha=0.5 TS-ASR loss " + Fmt("%.3f", before.loss_j) + " -> " + Fmt("%.3f", after.loss_j));
  }
  return o;
}

Outcome FreezeContract() {
  Outcome o;
  Gen gen(5);
  std::vector<Example> data = {RandomExample(gen, 4800), RandomExample(gen, 4800)};
  for (bool finetune : {false, true}) {
    TaskModel model(Task::kTse, OverfitModelConfig());
    TrainConfig tc = OverfitTrainConfig(Task::kTse, 3);
    tc.batch = 2;
    tc.freeze_upstream = !finetune;
    Trainer trainer(&model, tc, data);
    const std::uint64_t up0 = model.store().Checksum("upstream.");
    const std::uint64_t enc0 = model.store().Checksum("encoder.");
    trainer.Step();
    const std::uint64_t up1 = model.store().Checksum("upstream.");
    trainer.Step();
    trainer.Step();
    const std::uint64_t up3 = model.store().Checksum("upstream.");
    const bool enc_moved = model.store().Checksum("encoder.") != enc0;
    if (finetune) {
      o.Check(up1 != up0 && enc_moved, "--finetune-upstream: upstream checksum changes after one step");
    } else {
      o.Check(up1 == up0 && up3 == up0 && enc_moved, "frozen: upstream checksum constant over 3 steps");
    }
  }
  return o;
}

Outcome AnalysisReproduction() {
  Outcome o;
  const TaskScoreTable table = ReadScoreTable(fs::path(TSB_TEST_DATA_DIR) / "ssl_scores.csv");
  const CorrelationMatrix cm = ComputeCorrelationMatrix(table);
  auto index = [&](const std::string& t) {
    for (std::size_t i = 0; i < cm.tasks.size(); ++i) {
      if (cm.tasks[i] == t) return static_cast<Eigen::Index>(i);
    }
    throw DataError("task " + t + " missing from score table");
  };
  const double rho = cm.rho(index("tse"), index("sep"));
  o.Check(rho == 0.5, "spearman(TSE, Sep) = " + Fmt("%.17g", rho));

  TaskModel model(Task::kTseTsasr, OverfitModelConfig());
  Checkpoint ckpt;
  model.ExportParams(&ckpt);
  const auto weights = ExportLayerWeights(ckpt);
  double worst_sum = 0.0, worst_uniform = 0.0;
  for (const auto& [stream, w] : weights) {
    worst_sum = std::max(worst_sum, std::abs(w.sum() - 1.0));
    for (Eigen::Index l = 0; l < w.size(); ++l)
      worst_uniform = std::max(worst_uniform, std::abs(w(l) - 1.0 / static_cast<double>(w.size())));
  }
  o.Check(weights.size() == 3 && worst_sum <= 1e-6,
          std::to_string(weights.size()) + " weight streams sum to 1, max |sum - 1| = " + Fmt("%.2g", worst_sum));
  o.Check(worst_uniform <= 1e-12, "uniform at initialization, max deviation " + Fmt("%.2g", worst_uniform));
  return o;
}

Outcome EvaluationStubs() {
  Outcome o;
  TempDir dir("stubs");
  SimulationConfig sim;
  sim.corpus_dir = WriteCorpus(dir.path(), 4, 3, 1.0, 3);
  sim.out_dir = dir.path() / "sim";
  sim.n_mixtures = 12;
  sim.overlap_conditions = {0.0, 0.2, 0.4, 0.6};
  sim.seed = 8;
  BuildCorpus(sim);
  const Manifest m = ReadManifest(sim.out_dir / "manifest.jsonl");
  std::vector<Example> data;
  for (const auto& r : m.records) data.push_back(MakeExample(m, r, false));
  const OraclePredictor oracle;
  const auto tse = Evaluate(SubTask::kTse, data, oracle);
  const auto pvad = Evaluate(SubTask::kPvad, data, oracle);
  ValidateReport(tse);
  ValidateReport(pvad);
  const double fr = tse["aggregates"]["overall"]["fr"].get<double>();
  const double map = pvad["aggregates"]["overall"]["map"].get<double>();
  o.Check(fr == 0.0, "oracle FR = " + Fmt("%.3g%%", fr));
  o.Check(map == 1.0, "oracle mAP with one-hot posteriors = " + Fmt("%.6f", map));
  const double wer = Wer({"the cat sat"}, {"the bat sat on"});
  o.Check(std::abs(wer - 2.0 / 3.0) <= 1e-15, "WER(\"the cat sat\", \"the bat sat on\") = " + Fmt("%.6f", wer));
  return o;
}

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace tsb::testing

int main(int argc, char** argv) {
  using namespace tsb::testing;
  const std::vector<Criterion> criteria = {
      {1, "metric oracles", 5, MetricOracles},
      {2, "CTC brute force", 10, CtcBruteForce},
      {3, "gradient suite", 120, GradientSuite},
      {4, "simulator fidelity", 60, SimulatorFidelity},
      {5, "overfit TSE", 600, OverfitTse},
      {6, "overfit PVAD", 300, OverfitPvad},
      {7, "overfit TS-ASR", 900, OverfitTsasr},
      {8, "multi-task contract", 900, MultitaskContract},
      {9, "freeze/finetune contract", 60, FreezeContract},
      {10, "analysis reproduction", 5, AnalysisReproduction},
      {11, "evaluation stubs", 5, EvaluationStubs},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.Check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = out.pass && in_time;
    failures += !pass;
    for (const auto& n : out.notes) std::printf("      %s\n", n.c_str());
    std::printf("%s criterion %2d: %s (%.1f s, budget %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.title, secs,
                c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
