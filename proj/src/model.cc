// src/model.cc

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

#include "tsb/model.h"

#include <cmath>

#include "tsb/ctc.h"
#include "tsb/errors.h"
#include "tsb/signal_metrics.h"

namespace tsb {

std::string ToString(Task task) {
  switch (task) {
    case Task::kTse: return "tse";
    case Task::kPse: return "pse";
    case Task::kPvad: return "pvad";
    case Task::kTsasr: return "tsasr";
    case Task::kTseTsasr: return "tse+tsasr";
    case Task::kPsePvad: return "pse+pvad";
  }
  return "tse";
}

std::string ToString(SubTask task) {
  switch (task) {
    case SubTask::kTse: return "tse";
    case SubTask::kPse: return "pse";
    case SubTask::kPvad: return "pvad";
    case SubTask::kTsasr: return "tsasr";
  }
  return "tse";
}

Task ParseTask(const std::string& text) {
  for (Task t : {Task::kTse, Task::kPse, Task::kPvad, Task::kTsasr, Task::kTseTsasr, Task::kPsePvad}) {
    if (ToString(t) == text) return t;
  }
  throw UsageError("unknown task '" + text + "' (expected tse, pse, pvad, tsasr, tse+tsasr or pse+pvad)");
}

SubTask ParseSubTask(const std::string& text) {
  for (SubTask t : {SubTask::kTse, SubTask::kPse, SubTask::kPvad, SubTask::kTsasr}) {
    if (ToString(t) == text) return t;
  }
  if (text == "tse+tsasr" || text == "pse+pvad")
    throw UsageError("joint task '" + text + "' is evaluated one sub-task at a time");
  throw UsageError("unknown task '" + text + "' (expected tse, pse, pvad or tsasr)");
}

bool IsJoint(Task task) { return task == Task::kTseTsasr || task == Task::kPsePvad; }

SubTask PrimaryTask(Task task) {
  switch (task) {
    case Task::kTse:
    case Task::kTseTsasr: return SubTask::kTse;
    case Task::kPse:
    case Task::kPsePvad: return SubTask::kPse;
    case Task::kPvad: return SubTask::kPvad;
    case Task::kTsasr: return SubTask::kTsasr;
  }
  return SubTask::kTse;
}

std::optional<SubTask> SecondaryTask(Task task) {
  if (task == Task::kTseTsasr) return SubTask::kTsasr;
  if (task == Task::kPsePvad) return SubTask::kPvad;
  return std::nullopt;
}

bool Uses(Task task, SubTask sub) { return PrimaryTask(task) == sub || SecondaryTask(task) == sub; }

double MultitaskLoss(double l_i, double l_j, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw UsageError("task weight alpha must lie in [0, 1], got " + std::to_string(alpha));
  return alpha * l_i + (1.0 - alpha) * l_j;
}

int ModelConfig::ResolvedHidden(Task task) const {
  if (hidden > 0) return hidden;
  return task == Task::kPvad ? 32 : 512;
}

nlohmann::json ToJson(const ModelConfig& c) {
  return {{"upstream",
           {{"layers", c.upstream.layers},
            {"dim", c.upstream.dim},
            {"frontend_channels", c.upstream.frontend_channels},
            {"ff_dim", c.upstream.ff_dim},
            {"seed", c.upstream.seed}}},
          {"hidden", c.hidden},
          {"asr_hidden", c.asr_hidden},
          {"embed_dim", c.embed_dim},
          {"heads", c.heads},
          {"compress_dim", c.compress_dim},
          {"seed", c.seed}};
}

namespace {

template <typename T>
void Take(const nlohmann::json& j, const std::string& where, const std::string& key, T* out) {
  try {
    *out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError("config key '" + where + key + "' has the wrong type");
  }
}

}  // namespace

ModelConfig ModelConfigFromJson(const nlohmann::json& j, const ModelConfig& defaults) {
  if (!j.is_object()) throw UsageError("model config must be a JSON object");
  ModelConfig c = defaults;
  for (const auto& [key, value] : j.items()) {
    if (key == "upstream") {
      if (!value.is_object()) throw UsageError("config key 'model.upstream' must be an object");
      for (const auto& [k, v] : value.items()) {
        (void)v;
        if (k == "layers") Take(value, "model.upstream.", k, &c.upstream.layers);
        else if (k == "dim") Take(value, "model.upstream.", k, &c.upstream.dim);
        else if (k == "frontend_channels") Take(value, "model.upstream.", k, &c.upstream.frontend_channels);
        else if (k == "ff_dim") Take(value, "model.upstream.", k, &c.upstream.ff_dim);
        else if (k == "seed") Take(value, "model.upstream.", k, &c.upstream.seed);
        else throw UsageError("unknown config key 'model.upstream." + k + "'");
      }
    } else if (key == "hidden") Take(j, "model.", key, &c.hidden);
    else if (key == "asr_hidden") Take(j, "model.", key, &c.asr_hidden);
    else if (key == "embed_dim") Take(j, "model.", key, &c.embed_dim);
    else if (key == "heads") Take(j, "model.", key, &c.heads);
    else if (key == "compress_dim") Take(j, "model.", key, &c.compress_dim);
    else if (key == "seed") Take(j, "model.", key, &c.seed);
    else throw UsageError("unknown config key 'model." + key + "'");
  }
  if (c.hidden < 0 || c.asr_hidden < 1 || c.embed_dim < 1 || c.heads < 1 || c.compress_dim < 1)
    throw UsageError("model sizes must be positive");
  return c;
}

TaskModel::TaskModel(Task task, const ModelConfig& config)
    : task_(task), config_(config), hidden_(config.ResolvedHidden(task)) {
  upstream_ = ToyUpstream(&store_, config.upstream);
  EncoderConfig ec;
  ec.num_layers = config.upstream.layers + 1;
  ec.dim = config.upstream.dim;
  ec.hidden = hidden_;
  ec.embed_dim = config.embed_dim;
  ec.heads = config.heads;
  ec.compress_dim = config.compress_dim;
  ec.seed = config.seed;
  encoder_ = TargetEncoder(&store_, "encoder", ec);
  const int width = 2 * hidden_;
  if (Uses(task, SubTask::kTse)) tse_ = MaskHead(&store_, "head.tse", width, config.seed);
  if (Uses(task, SubTask::kPse)) pse_ = MaskHead(&store_, "head.pse", width, config.seed);
  if (Uses(task, SubTask::kPvad)) pvad_ = PvadHead(&store_, "head.pvad", width, config.seed);
  if (Uses(task, SubTask::kTsasr))
    asr_ = AsrHead(&store_, "head.tsasr", width, config.asr_hidden, config.seed);
}

const MaskHead& TaskModel::mask_head(SubTask sub) const {
  if (sub == SubTask::kPse) return pse_;
  return tse_;
}

LayerStack TaskModel::Extract(const AudioSignal& wave) const {
  return upstream_.Forward(store_, wave);
}

double TaskModel::SubTaskLoss(const Example& ex, SubTask sub, const Mat& z, double scale,
                              Mat* grad_z, Grads* grads) const {
  const bool backward = grad_z != nullptr;
  switch (sub) {
    case SubTask::kTse:
    case SubTask::kPse: {
      const MaskHead& head = mask_head(sub);
      MaskHeadCache cache;
      std::vector<Real> est = head.Forward(store_, ex.mixture.samples(), z, &cache);
      std::vector<Real> g;
      const double loss = NegSiSnrLoss(est, ex.target.samples(), backward ? &g : nullptr);
      if (backward) {
        for (Real& v : g) v *= scale;
        *grad_z = head.Backward(store_, z, cache, g, grads);
      }
      return loss;
    }
    case SubTask::kPvad: {
      const Mat post = pvad_.Forward(store_, z);
      Mat g;
      const double loss = CrossEntropy(post, ex.labels, backward ? &g : nullptr);
      if (backward) *grad_z = pvad_.Backward(store_, z, g * scale, grads);
      return loss;
    }
    case SubTask::kTsasr: {
      AsrHeadCache cache;
      const Mat logits = asr_.Forward(store_, z, &cache);
      Mat g;
      const double loss = CtcLoss(logits, ex.tokens, backward ? &g : nullptr);
      if (backward) *grad_z = asr_.Backward(store_, z, cache, g * scale, grads);
      return loss;
    }
  }
  return 0.0;
}

ExampleLoss TaskModel::ForwardBackward(const Example& ex, double alpha, bool finetune,
                                       Grads* grads) const {
  const bool upstream_grad = finetune && grads != nullptr;
  LayerStack mix_local, enroll_local;
  UpstreamCache mix_cache, enroll_cache;
  const LayerStack* mix = ex.mix_stack.get();
  const LayerStack* enroll = ex.enroll_stack.get();
  if (upstream_grad || mix == nullptr) {
    mix_local = upstream_.Forward(store_, ex.mixture, upstream_grad ? &mix_cache : nullptr);
    mix = &mix_local;
  }
  if (upstream_grad || enroll == nullptr) {
    enroll_local = upstream_.Forward(store_, ex.enrollment, upstream_grad ? &enroll_cache : nullptr);
    enroll = &enroll_local;
  }

  EncoderCache cache;
  const Mat z = encoder_.Forward(store_, *mix, *enroll, &cache);
  const SubTask primary = PrimaryTask(task_);
  const std::optional<SubTask> secondary = SecondaryTask(task_);
  const double scale_i = secondary ? alpha : 1.0;

  ExampleLoss out;
  Mat grad_z, grad_j;
  const bool backward = grads != nullptr;
  out.loss_i = SubTaskLoss(ex, primary, z, scale_i, backward ? &grad_z : nullptr, grads);
  if (secondary) {
    out.loss_j = SubTaskLoss(ex, *secondary, z, 1.0 - alpha, backward ? &grad_j : nullptr, grads);
    out.total = MultitaskLoss(out.loss_i, out.loss_j, alpha);
    if (backward) grad_z += grad_j;
  } else {
    out.total = out.loss_i;
  }
  if (!backward) return out;

  std::vector<Mat> grad_mix, grad_enroll;
  encoder_.Backward(store_, *mix, *enroll, cache, grad_z, grads,
                    upstream_grad ? &grad_mix : nullptr, upstream_grad ? &grad_enroll : nullptr);
  if (upstream_grad) {
    upstream_.Backward(store_, *mix, mix_cache, grad_mix, grads);
    upstream_.Backward(store_, *enroll, enroll_cache, grad_enroll, grads);
  }
  return out;
}

Prediction TaskModel::Predict(const Example& ex, SubTask sub) const {
  if (!Uses(task_, sub))
    throw UsageError("model trained for " + ToString(task_) + " has no " + ToString(sub) + " head");
  LayerStack mix_local, enroll_local;
  const LayerStack* mix = ex.mix_stack.get();
  const LayerStack* enroll = ex.enroll_stack.get();
  if (mix == nullptr) {
    mix_local = upstream_.Forward(store_, ex.mixture);
    mix = &mix_local;
  }
  if (enroll == nullptr) {
    enroll_local = upstream_.Forward(store_, ex.enrollment);
    enroll = &enroll_local;
  }
  EncoderCache cache;
  const Mat z = encoder_.Forward(store_, *mix, *enroll, &cache);
  Prediction p;
  switch (sub) {
    case SubTask::kTse:
    case SubTask::kPse:
      p.estimate = mask_head(sub).Forward(store_, ex.mixture.samples(), z, nullptr);
      break;
    case SubTask::kPvad:
      p.posteriors = pvad_.Forward(store_, z);
      break;
    case SubTask::kTsasr:
      p.tokens = CtcGreedyDecode(asr_.Forward(store_, z, nullptr));
      break;
  }
  return p;
}

void TaskModel::ExportParams(Checkpoint* ckpt, const std::string& prefix) const {
  for (std::size_t i = 0; i < store_.size(); ++i) {
    const ParamId id = store_.At(i);
    ckpt->tensors.push_back(NamedTensor{prefix + store_.Name(id), store_[id], TensorDtype::kFloat64});
  }
}

void TaskModel::ImportParams(const Checkpoint& ckpt, const std::string& prefix) {
  for (std::size_t i = 0; i < store_.size(); ++i) {
    const ParamId id = store_.At(i);
    const NamedTensor& t = ckpt.Get(prefix + store_.Name(id));
    Mat& dst = store_[id];
    if (t.value.rows() != dst.rows() || t.value.cols() != dst.cols())
      throw DataError("checkpoint tensor '" + t.name + "' has shape " + std::to_string(t.value.rows()) +
                      "x" + std::to_string(t.value.cols()) + ", model expects " +
                      std::to_string(dst.rows()) + "x" + std::to_string(dst.cols()));
    dst = t.value;
  }
}

Example MakeExample(const Manifest& manifest, const ManifestRecord& record, bool need_tokens) {
  MixtureSample s = LoadSample(manifest, record);
  Example ex;
  ex.id = record.id;
  ex.mixture = std::move(s.mixture);
  ex.target = std::move(s.target_ref);
  ex.enrollment = std::move(s.enrollment);
  ex.labels = record.labels;
  ex.overlap_ratio = record.overlap_ratio;
  ex.mixture_len = record.mixture_len;
  if (record.transcript) ex.transcript = *record.transcript;
  if (need_tokens) {
    if (!record.transcript || NormalizeTranscript(*record.transcript).empty())
      throw DataError("record " + record.id + " has no transcript");
    ex.tokens = EncodeTranscript(*record.transcript);
  }
  return ex;
}

}  // namespace tsb
