// include/tsb/trainer.h

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

#ifndef TSB_TRAINER_H_
#define TSB_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsb/model.h"

namespace tsb {

struct TrainConfig {
  Task task = Task::kTse;
  double alpha = 0.5;
  double lr = 1e-3;
  int warmup = 100;
  // "constant" after warmup, or "cosine" decay to zero at `steps`.
  std::string schedule = "constant";
  int steps = 1000;
  int batch = 8;
  double clip = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool freeze_upstream = true;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;
  int threads = 1;
  // Gradients are reduced over a fixed number of batch chunks, so results do
  // not depend on `threads`.
  bool deterministic = false;
};

nlohmann::json ToJson(const TrainConfig& config);
// Rejects unknown keys with UsageError. "task" is accepted as a string.
TrainConfig TrainConfigFromJson(const nlohmann::json& j, const TrainConfig& defaults = {});

struct StepRecord {
  int step = 0;  // 1-based index of the completed update
  double loss_i = 0.0;
  double loss_j = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
};

// Adam with linear warmup, an optional cosine decay and global-norm clipping over the trainable tensors
// of a TaskModel. Batches are a pure function of (seed, step): example k of
// step s is position (s * batch + k) mod N of a per-epoch permutation, so a
// resumed run sees exactly the batches an uninterrupted run would.
class Trainer {
 public:
  Trainer(TaskModel* model, const TrainConfig& config, std::vector<Example> data);

  // Computes upstream stacks once for every example when the upstream is
  // frozen. Called lazily by Step.
  void Precompute();

  StepRecord Step();
  // Runs until `config.steps` updates have been made in total.
  std::vector<StepRecord> Run(const std::function<void(const StepRecord&)>& on_step = {});

  // Indices of the examples in batch `step` (0-based).
  std::vector<std::size_t> BatchIndices(int step) const;
  double LearningRate(int step) const;

  int step() const { return step_; }
  double running_loss() const { return running_loss_; }
  const TrainConfig& config() const { return config_; }
  const std::vector<Example>& data() const { return data_; }
  TaskModel& model() { return *model_; }

  // Model tensors, Adam moments and counters in one checkpoint (float64).
  Checkpoint State() const;
  void Save(const std::filesystem::path& path, const nlohmann::json& extra_meta = {}) const;
  // Restores tensors, moments and counters. The model must have been built
  // with the same configuration.
  void Restore(const Checkpoint& ckpt);

 private:
  std::vector<std::size_t> Permutation(std::uint64_t epoch) const;

  TaskModel* model_;
  TrainConfig config_;
  std::vector<Example> data_;
  Grads m_, v_;
  int step_ = 0;
  double running_loss_ = 0.0;
  bool precomputed_ = false;
  mutable std::map<std::uint64_t, std::vector<std::size_t>> perms_;
};

// Builds a model for `config.task` and reads its tensors from a checkpoint
// written by Trainer::Save.
std::unique_ptr<TaskModel> LoadModel(const Checkpoint& ckpt);

}  // namespace tsb

#endif  // TSB_TRAINER_H_
