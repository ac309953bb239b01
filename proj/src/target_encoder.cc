// src/target_encoder.cc

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

#include "tsb/target_encoder.h"

#include <cmath>

#include "tsb/errors.h"
#include "tsb/seed.h"

namespace tsb {

Mhfa::Mhfa(ParamStore* store, const std::string& name, const EncoderConfig& config)
    : heads_(config.heads), compress_dim_(config.compress_dim) {
  key_mixer_ = LayerMixer(store, name + ".key_weights", config.num_layers);
  value_mixer_ = LayerMixer(store, name + ".value_weights", config.num_layers);
  key_compress_ = Linear(store, name + ".key_compress", config.dim, config.compress_dim, config.seed);
  value_compress_ =
      Linear(store, name + ".value_compress", config.dim, config.compress_dim, config.seed);
  queries_ = store->Add(name + ".queries", config.heads, config.compress_dim);
  InitUniform(&(*store)[queries_], 1.0 / std::sqrt(static_cast<Real>(config.compress_dim)),
              DeriveSeed(config.seed, name + ".queries"));
  output_ = Linear(store, name + ".out", config.heads * config.compress_dim, config.embed_dim,
                   config.seed);
}

RowVec Mhfa::Forward(const ParamStore& store, const LayerStack& stack, MhfaCache* cache) const {
  if (stack.Frames() == 0) throw DataError("speaker encoder: enrollment has no frames");
  MhfaCache local;
  MhfaCache& c = cache != nullptr ? *cache : local;
  c.key_in = key_mixer_.Forward(store, stack);
  c.value_in = value_mixer_.Forward(store, stack);
  c.keys = key_compress_.Forward(store, c.key_in);
  c.values = value_compress_.Forward(store, c.value_in);
  Mat logits = c.keys * store[queries_].transpose();  // T x heads
  c.attn.resize(logits.rows(), logits.cols());
  for (Eigen::Index h = 0; h < logits.cols(); ++h) {
    const Real m = logits.col(h).maxCoeff();
    c.attn.col(h) = (logits.col(h).array() - m).exp();
    c.attn.col(h) /= c.attn.col(h).sum();
  }
  c.pooled.resize(1, heads_ * compress_dim_);
  for (int h = 0; h < heads_; ++h)
    c.pooled.block(0, h * compress_dim_, 1, compress_dim_) = c.attn.col(h).transpose() * c.values;
  return output_.Forward(store, c.pooled).row(0);
}

void Mhfa::Backward(const ParamStore& store, const LayerStack& stack, const MhfaCache& cache,
                    const RowVec& grad_e, Grads* grads, std::vector<Mat>* grad_stack) const {
  const Mat d_pooled = output_.Backward(store, cache.pooled, Mat(grad_e), grads);
  const Eigen::Index frames = cache.values.rows();
  Mat d_values = Mat::Zero(frames, compress_dim_);
  Mat d_logits(frames, heads_);
  for (int h = 0; h < heads_; ++h) {
    const RowVec dp = d_pooled.block(0, h * compress_dim_, 1, compress_dim_);
    d_values.noalias() += cache.attn.col(h) * dp;
    Eigen::VectorXd d_attn = cache.values * dp.transpose();
    const Real dot = cache.attn.col(h).dot(d_attn);
    d_logits.col(h) = cache.attn.col(h).array() * (d_attn.array() - dot);
  }
  const Mat& q = store[queries_];
  Mat d_keys = d_logits * q;
  if (grads != nullptr) (*grads)[queries_].noalias() += d_logits.transpose() * cache.keys;
  Mat d_key_in = key_compress_.Backward(store, cache.key_in, d_keys, grads);
  Mat d_value_in = value_compress_.Backward(store, cache.value_in, d_values, grads);
  key_mixer_.Backward(store, stack, d_key_in, grads, grad_stack);
  value_mixer_.Backward(store, stack, d_value_in, grads, grad_stack);
}

Mat BroadcastMultiply(const Mat& m, const RowVec& p) {
  if (m.cols() != p.cols())
    throw DataError("broadcast multiply: width " + std::to_string(m.cols()) + " vs " +
                    std::to_string(p.cols()));
  return m.array().rowwise() * p.array();
}

TargetEncoder::TargetEncoder(ParamStore* store, const std::string& name,
                             const EncoderConfig& config)
    : config_(config) {
  const int h = config.hidden;
  mhfa_ = Mhfa(store, name + ".mhfa", config);
  extractor_mixer_ = LayerMixer(store, name + ".extractor_weights", config.num_layers);
  mix_blstm_ = Blstm(store, name + ".mix_blstm", config.dim, h, config.seed);
  spk_proj_ = Linear(store, name + ".spk_proj", config.embed_dim, 2 * h, config.seed);
  ext0_ = Blstm(store, name + ".extractor0", 2 * h, h, config.seed);
  ext1_ = Blstm(store, name + ".extractor1", 2 * h, h, config.seed);
}

RowVec TargetEncoder::Embed(const ParamStore& store, const LayerStack& enroll,
                            MhfaCache* cache) const {
  return mhfa_.Forward(store, enroll, cache);
}

Mat TargetEncoder::Encode(const ParamStore& store, const LayerStack& mix, const RowVec& e,
                          EncoderCache* cache, const RowVec* forced_proj) const {
  if (e.cols() != config_.embed_dim)
    throw DataError("speaker embedding has " + std::to_string(e.cols()) + " dims, expected " +
                    std::to_string(config_.embed_dim));
  EncoderCache local;
  EncoderCache& c = cache != nullptr ? *cache : local;
  c.e = e;
  c.mixed = extractor_mixer_.Forward(store, mix);
  c.m = mix_blstm_.Forward(store, c.mixed, &c.mix_blstm);
  c.proj = forced_proj != nullptr ? *forced_proj : RowVec(spk_proj_.Forward(store, Mat(e)).row(0));
  c.fused = BroadcastMultiply(c.m, c.proj);
  c.z0 = ext0_.Forward(store, c.fused, &c.ext0);
  return ext1_.Forward(store, c.z0, &c.ext1);
}

Mat TargetEncoder::Forward(const ParamStore& store, const LayerStack& mix,
                           const LayerStack& enroll, EncoderCache* cache) const {
  RowVec e = Embed(store, enroll, &cache->mhfa);
  return Encode(store, mix, e, cache);
}

void TargetEncoder::Backward(const ParamStore& store, const LayerStack& mix,
                             const LayerStack& enroll, const EncoderCache& cache,
                             const Mat& grad_z, Grads* grads, std::vector<Mat>* grad_mix,
                             std::vector<Mat>* grad_enroll) const {
  Mat d_z0 = ext1_.Backward(store, cache.z0, cache.ext1, grad_z, grads);
  Mat d_fused = ext0_.Backward(store, cache.fused, cache.ext0, d_z0, grads);
  Mat d_m = BroadcastMultiply(d_fused, cache.proj);
  RowVec d_proj = (d_fused.array() * cache.m.array()).colwise().sum();
  Mat d_e = spk_proj_.Backward(store, Mat(cache.e), Mat(d_proj), grads);
  Mat d_mixed = mix_blstm_.Backward(store, cache.mixed, cache.mix_blstm, d_m, grads);
  extractor_mixer_.Backward(store, mix, d_mixed, grads, grad_mix);
  mhfa_.Backward(store, enroll, cache.mhfa, d_e.row(0), grads, grad_enroll);
}

}  // namespace tsb
