// include/tsb/model.h

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

#ifndef TSB_MODEL_H_
#define TSB_MODEL_H_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsb/audio.h"
#include "tsb/checkpoint.h"
#include "tsb/heads.h"
#include "tsb/manifest.h"
#include "tsb/mixture.h"
#include "tsb/target_encoder.h"
#include "tsb/upstream.h"

namespace tsb {

enum class Task { kTse, kPse, kPvad, kTsasr, kTseTsasr, kPsePvad };
// Single-task building blocks of a (possibly joint) task.
enum class SubTask { kTse, kPse, kPvad, kTsasr };

std::string ToString(Task task);
std::string ToString(SubTask task);
Task ParseTask(const std::string& text);
SubTask ParseSubTask(const std::string& text);
bool IsJoint(Task task);
// Primary and, for joint tasks, secondary sub-task (L = alpha L_i + (1 - alpha) L_j).
SubTask PrimaryTask(Task task);
std::optional<SubTask> SecondaryTask(Task task);
bool Uses(Task task, SubTask sub);

// alpha * l_i + (1 - alpha) * l_j; UsageError unless 0 <= alpha <= 1.
double MultitaskLoss(double l_i, double l_j, double alpha);

struct ModelConfig {
  UpstreamConfig upstream;
  int hidden = 0;  // 0 selects the task default: 32 for pvad, 512 otherwise
  int asr_hidden = 512;
  int embed_dim = 256;
  int heads = 4;
  int compress_dim = 128;
  std::uint64_t seed = 1;

  int ResolvedHidden(Task task) const;
};

nlohmann::json ToJson(const ModelConfig& config);
// Rejects unknown keys with UsageError.
ModelConfig ModelConfigFromJson(const nlohmann::json& j, const ModelConfig& defaults = {});

// One training or evaluation example. Stacks are filled in when the upstream
// is frozen (computed once) or when features were imported.
struct Example {
  std::string id;
  AudioSignal mixture;
  AudioSignal target;
  AudioSignal enrollment;
  std::vector<FrameLabel> labels;
  std::vector<int> tokens;
  std::string transcript;
  double overlap_ratio = 0.0;
  std::size_t mixture_len = 0;
  std::shared_ptr<const LayerStack> mix_stack;
  std::shared_ptr<const LayerStack> enroll_stack;
};

struct ExampleLoss {
  double loss_i = 0.0;
  double loss_j = 0.0;
  double total = 0.0;
};

struct Prediction {
  std::vector<Real> estimate;  // tse / pse
  Mat posteriors;              // pvad, T x 3
  std::vector<int> tokens;     // tsasr
};

// Upstream, shared target speech encoder and the heads a task needs, with all
// tensors in one ParamStore. Tensor prefixes: "upstream.", "encoder.",
// "head.<subtask>.". Each tensor is seeded from its name, so adding a head
// does not change the initialization of the others.
class TaskModel {
 public:
  TaskModel(Task task, const ModelConfig& config);

  Task task() const { return task_; }
  const ModelConfig& config() const { return config_; }
  int hidden() const { return hidden_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const ToyUpstream& upstream() const { return upstream_; }
  const TargetEncoder& encoder() const { return encoder_; }
  const MaskHead& mask_head(SubTask sub) const;
  const PvadHead& pvad_head() const { return pvad_; }
  const AsrHead& asr_head() const { return asr_; }

  LayerStack Extract(const AudioSignal& wave) const;

  // Loss of one example; accumulates gradients into `grads` when non-null.
  // Stack gradients flow into the upstream only when `finetune` is set.
  ExampleLoss ForwardBackward(const Example& ex, double alpha, bool finetune, Grads* grads) const;

  // Inference output of one sub-task.
  Prediction Predict(const Example& ex, SubTask sub) const;

  // Model tensors as checkpoint entries (float64) and back. Loading requires
  // every model tensor with a matching shape.
  void ExportParams(Checkpoint* ckpt, const std::string& prefix = "param/") const;
  void ImportParams(const Checkpoint& ckpt, const std::string& prefix = "param/");

 private:
  double SubTaskLoss(const Example& ex, SubTask sub, const Mat& z, double scale, Mat* grad_z,
                     Grads* grads) const;

  Task task_;
  ModelConfig config_;
  int hidden_ = 0;
  ParamStore store_;
  ToyUpstream upstream_;
  TargetEncoder encoder_;
  MaskHead tse_, pse_;
  PvadHead pvad_;
  AsrHead asr_;
};

// Reads the example audio, labels and transcript tokens of a manifest record.
Example MakeExample(const Manifest& manifest, const ManifestRecord& record, bool need_tokens);

}  // namespace tsb

#endif  // TSB_MODEL_H_
