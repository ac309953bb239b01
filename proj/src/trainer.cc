// src/trainer.cc

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

#include "tsb/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tsb/errors.h"
#include "tsb/parallel.h"
#include "tsb/seed.h"

namespace tsb {

nlohmann::json ToJson(const TrainConfig& c) {
  return {{"task", ToString(c.task)},
          {"alpha", c.alpha},
          {"lr", c.lr},
          {"warmup", c.warmup},
          {"schedule", c.schedule},
          {"steps", c.steps},
          {"batch", c.batch},
          {"clip", c.clip},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"freeze_upstream", c.freeze_upstream},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"threads", c.threads},
          {"deterministic", c.deterministic}};
}

namespace {

constexpr int kDeterministicChunks = 4;

template <typename T>
void Take(const nlohmann::json& v, const std::string& key, T* out) {
  try {
    *out = v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError("config key 'train." + key + "' has the wrong type");
  }
}

}  // namespace

TrainConfig TrainConfigFromJson(const nlohmann::json& j, const TrainConfig& defaults) {
  if (!j.is_object()) throw UsageError("train config must be a JSON object");
  TrainConfig c = defaults;
  for (const auto& [key, v] : j.items()) {
    if (key == "task") {
      std::string s;
      Take(v, key, &s);
      c.task = ParseTask(s);
    } else if (key == "alpha") Take(v, key, &c.alpha);
    else if (key == "lr") Take(v, key, &c.lr);
    else if (key == "warmup") Take(v, key, &c.warmup);
    else if (key == "schedule") Take(v, key, &c.schedule);
    else if (key == "steps") Take(v, key, &c.steps);
    else if (key == "batch") Take(v, key, &c.batch);
    else if (key == "clip") Take(v, key, &c.clip);
    else if (key == "beta1") Take(v, key, &c.beta1);
    else if (key == "beta2") Take(v, key, &c.beta2);
    else if (key == "adam_eps") Take(v, key, &c.adam_eps);
    else if (key == "freeze_upstream") Take(v, key, &c.freeze_upstream);
    else if (key == "seed") Take(v, key, &c.seed);
    else if (key == "checkpoint_every") Take(v, key, &c.checkpoint_every);
    else if (key == "threads") Take(v, key, &c.threads);
    else if (key == "deterministic") Take(v, key, &c.deterministic);
    else throw UsageError("unknown config key 'train." + key + "'");
  }
  return c;
}

Trainer::Trainer(TaskModel* model, const TrainConfig& config, std::vector<Example> data)
    : model_(model), config_(config), data_(std::move(data)) {
  if (data_.empty()) throw DataError("training set is empty");
  if (config.batch < 1) throw UsageError("batch size must be at least 1");
  if (config.steps < 0) throw UsageError("steps must be nonnegative");
  if (config.lr < 0.0) throw UsageError("learning rate must be nonnegative");
  if (config.schedule != "constant" && config.schedule != "cosine")
    throw UsageError("unknown lr schedule '" + config.schedule + "' (expected constant or cosine)");
  MultitaskLoss(0.0, 0.0, config.alpha);
  if (config.task != model->task())
    throw UsageError("trainer task " + ToString(config.task) + " does not match model task " +
                     ToString(model->task()));
  model_->store().SetTrainable("", true);
  model_->store().SetTrainable("upstream.", !config.freeze_upstream);
  m_ = Grads(model_->store());
  v_ = Grads(model_->store());
}

void Trainer::Precompute() {
  if (precomputed_) return;
  precomputed_ = true;
  if (!config_.freeze_upstream) return;
  ParallelFor(data_.size(), config_.threads, [&](std::size_t i) {
    Example& ex = data_[i];
    if (!ex.mix_stack) ex.mix_stack = std::make_shared<LayerStack>(model_->Extract(ex.mixture));
    if (!ex.enroll_stack)
      ex.enroll_stack = std::make_shared<LayerStack>(model_->Extract(ex.enrollment));
  });
}

std::vector<std::size_t> Trainer::Permutation(std::uint64_t epoch) const {
  auto it = perms_.find(epoch);
  if (it != perms_.end()) return it->second;
  std::vector<std::size_t> perm(data_.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(DeriveSeed(DeriveSeed(config_.seed, "batches"), epoch));
  std::shuffle(perm.begin(), perm.end(), rng);
  if (perms_.size() > 64) perms_.clear();
  perms_[epoch] = perm;
  return perm;
}

std::vector<std::size_t> Trainer::BatchIndices(int step) const {
  const std::size_t n = data_.size();
  std::vector<std::size_t> out;
  for (int k = 0; k < config_.batch; ++k) {
    const std::uint64_t g = static_cast<std::uint64_t>(step) * config_.batch + k;
    out.push_back(Permutation(g / n)[g % n]);
  }
  return out;
}

double Trainer::LearningRate(int step) const {
  double lr = config_.lr;
  if (config_.warmup > 0) lr *= std::min(1.0, static_cast<double>(step + 1) / config_.warmup);
  if (config_.schedule == "cosine" && step >= config_.warmup && config_.steps > config_.warmup) {
    const double progress = std::min(
        1.0, static_cast<double>(step - config_.warmup) / (config_.steps - config_.warmup));
    lr *= 0.5 * (1.0 + std::cos(M_PI * progress));
  }
  return lr;
}

StepRecord Trainer::Step() {
  Precompute();
  const std::vector<std::size_t> batch = BatchIndices(step_);
  const ParamStore& store = model_->store();
  const bool finetune = !config_.freeze_upstream;

  // Contiguous chunks, reduced in chunk order.
  const int chunks = config_.deterministic ? kDeterministicChunks : std::max(config_.threads, 1);
  const std::size_t workers = std::min<std::size_t>(chunks, batch.size());
  std::vector<Grads> partial(workers);
  std::vector<ExampleLoss> losses(batch.size());
  ParallelFor(workers, config_.threads, [&](std::size_t w) {
    partial[w] = Grads(store);
    const std::size_t lo = w * batch.size() / workers, hi = (w + 1) * batch.size() / workers;
    for (std::size_t k = lo; k < hi; ++k) {
      const Example& ex = data_[batch[k]];
      losses[k] = model_->ForwardBackward(ex, config_.alpha, finetune, &partial[w]);
      if (!std::isfinite(losses[k].total))
        throw NumericError("non-finite loss on example " + ex.id + " at step " +
                           std::to_string(step_ + 1));
    }
  });
  Grads& grads = partial[0];
  for (std::size_t w = 1; w < workers; ++w) grads.Add(partial[w]);
  const Real inv = 1.0 / static_cast<Real>(batch.size());
  grads.Scale(inv);

  StepRecord rec;
  for (const auto& l : losses) {
    rec.loss_i += l.loss_i;
    rec.loss_j += l.loss_j;
    rec.total += l.total;
  }
  rec.loss_i *= inv;
  rec.loss_j *= inv;
  rec.total *= inv;

  Real sq = 0.0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (store.Trainable(store.At(i))) sq += grads[store.At(i)].squaredNorm();
  }
  rec.grad_norm = std::sqrt(sq);
  if (!std::isfinite(rec.grad_norm))
    throw NumericError("non-finite gradient norm at step " + std::to_string(step_ + 1));
  const Real clip_scale =
      (config_.clip > 0.0 && rec.grad_norm > config_.clip) ? config_.clip / rec.grad_norm : 1.0;

  rec.lr = LearningRate(step_);
  const int t = step_ + 1;
  const Real bias1 = 1.0 - std::pow(config_.beta1, t);
  const Real bias2 = 1.0 - std::pow(config_.beta2, t);
  ParamStore& params = model_->store();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamId id = params.At(i);
    if (!params.Trainable(id)) continue;
    Mat g = grads[id];
    if (clip_scale != 1.0) g *= clip_scale;
    m_[id] = config_.beta1 * m_[id] + (1.0 - config_.beta1) * g;
    v_[id] = config_.beta2 * v_[id] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    params[id].array() -=
        rec.lr * (m_[id].array() / bias1) / ((v_[id].array() / bias2).sqrt() + config_.adam_eps);
  }

  for (const LayerMixer* mixer :
       {&model_->encoder().extractor_mixer(), &model_->encoder().mhfa().key_mixer(),
        &model_->encoder().mhfa().value_mixer()}) {
    const RowVec w = mixer->Weights(params);
    if (std::abs(w.sum() - 1.0) > 1e-6 || w.minCoeff() < 0.0 || !w.allFinite())
      throw NumericError("layer weights left the simplex at step " + std::to_string(t));
  }

  running_loss_ = step_ == 0 ? rec.total : 0.9 * running_loss_ + 0.1 * rec.total;
  step_ = t;
  rec.step = t;
  return rec;
}

std::vector<StepRecord> Trainer::Run(const std::function<void(const StepRecord&)>& on_step) {
  std::vector<StepRecord> out;
  while (step_ < config_.steps) {
    out.push_back(Step());
    if (on_step) on_step(out.back());
  }
  return out;
}

Checkpoint Trainer::State() const {
  Checkpoint ckpt;
  ckpt.meta = {{"format", "tsb-checkpoint"},
               {"task", ToString(model_->task())},
               {"model", ToJson(model_->config())},
               {"train", ToJson(config_)},
               {"step", step_},
               {"running_loss", running_loss_}};
  model_->ExportParams(&ckpt);
  const ParamStore& store = model_->store();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const ParamId id = store.At(i);
    ckpt.tensors.push_back(NamedTensor{"adam.m/" + store.Name(id), m_[id], TensorDtype::kFloat64});
    ckpt.tensors.push_back(NamedTensor{"adam.v/" + store.Name(id), v_[id], TensorDtype::kFloat64});
  }
  return ckpt;
}

void Trainer::Save(const std::filesystem::path& path, const nlohmann::json& extra_meta) const {
  Checkpoint ckpt = State();
  if (extra_meta.is_object()) {
    for (const auto& [k, v] : extra_meta.items()) ckpt.meta[k] = v;
  }
  SaveCheckpoint(path, ckpt);
}

void Trainer::Restore(const Checkpoint& ckpt) {
  if (ckpt.meta.value("task", "") != ToString(model_->task()))
    throw DataError("checkpoint task does not match the trainer task " + ToString(model_->task()));
  model_->ImportParams(ckpt);
  const ParamStore& store = model_->store();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const ParamId id = store.At(i);
    m_[id] = ckpt.Get("adam.m/" + store.Name(id)).value;
    v_[id] = ckpt.Get("adam.v/" + store.Name(id)).value;
  }
  step_ = ckpt.meta.at("step").get<int>();
  running_loss_ = ckpt.meta.at("running_loss").get<double>();
}

std::unique_ptr<TaskModel> LoadModel(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("task") || !ckpt.meta.contains("model"))
    throw DataError("checkpoint meta lacks task or model configuration");
  const Task task = ParseTask(ckpt.meta.at("task").get<std::string>());
  auto model = std::make_unique<TaskModel>(task, ModelConfigFromJson(ckpt.meta.at("model")));
  model->ImportParams(ckpt);
  return model;
}

}  // namespace tsb
