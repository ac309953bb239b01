// src/heads.cc

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

#include "tsb/heads.h"

#include <cmath>

#include "tsb/ctc.h"
#include "tsb/errors.h"
#include "tsb/seed.h"

namespace tsb {

MaskHead::MaskHead(ParamStore* store, const std::string& name, int in_dim, std::uint64_t seed) {
  encoder_ = Linear(store, name + ".encoder", kMaskKernel, kMaskFilters, seed);
  mask_proj_ = Linear(store, name + ".mask", in_dim, kMaskFilters, seed);
  decoder_weight_ = store->Add(name + ".decoder.weight", kMaskFilters, kMaskKernel);
  decoder_bias_ = store->Add(name + ".decoder.bias", 1, 1);
  InitUniform(&(*store)[decoder_weight_], 1.0 / std::sqrt(static_cast<Real>(kMaskFilters)),
              DeriveSeed(seed, name + ".decoder.weight"));
}

Eigen::Index MaskHead::NumFrames(std::size_t length) {
  const std::size_t padded = length + 2 * kMaskPad;
  if (padded < static_cast<std::size_t>(kMaskKernel)) return 0;
  return static_cast<Eigen::Index>((padded - kMaskKernel) / kMaskStride + 1);
}

std::vector<Real> MaskHead::Forward(const ParamStore& store, std::span<const Real> y, const Mat& z,
                                    MaskHeadCache* cache, const Mat* forced_mask) const {
  const Eigen::Index num_frames = NumFrames(y.size());
  if (num_frames < 1)
    throw DataError("mask head: waveform of " + std::to_string(y.size()) +
                    " samples is shorter than one kernel after padding");
  MaskHeadCache local;
  MaskHeadCache& c = cache != nullptr ? *cache : local;
  c.length = y.size();
  const auto n = static_cast<Eigen::Index>(y.size());
  c.frames = Mat::Zero(num_frames, kMaskKernel);
  for (Eigen::Index f = 0; f < num_frames; ++f) {
    for (Eigen::Index k = 0; k < kMaskKernel; ++k) {
      const Eigen::Index s = f * kMaskStride + k - kMaskPad;
      if (s >= 0 && s < n) c.frames(f, k) = y[s];
    }
  }
  c.encoded = encoder_.Forward(store, c.frames).cwiseMax(0.0);
  if (forced_mask != nullptr) c.mask = *forced_mask;
  else c.mask = mask_proj_.Forward(store, z).cwiseMax(0.0);
  c.common = std::min(num_frames, c.mask.rows());
  c.masked = c.mask.topRows(c.common).cwiseProduct(c.encoded.topRows(c.common));

  const Mat basis = c.masked * store[decoder_weight_];
  const Real bias = store[decoder_bias_](0, 0);
  std::vector<Real> out(y.size(), bias);
  for (Eigen::Index f = 0; f < c.common; ++f) {
    for (Eigen::Index k = 0; k < kMaskKernel; ++k) {
      const Eigen::Index s = f * kMaskStride + k - kMaskPad;
      if (s >= 0 && s < n) out[s] += basis(f, k);
    }
  }
  return out;
}

Mat MaskHead::Backward(const ParamStore& store, const Mat& z, const MaskHeadCache& cache,
                       std::span<const Real> grad_out, Grads* grads) const {
  const auto n = static_cast<Eigen::Index>(cache.length);
  Mat d_basis = Mat::Zero(cache.common, kMaskKernel);
  for (Eigen::Index f = 0; f < cache.common; ++f) {
    for (Eigen::Index k = 0; k < kMaskKernel; ++k) {
      const Eigen::Index s = f * kMaskStride + k - kMaskPad;
      if (s >= 0 && s < n) d_basis(f, k) = grad_out[s];
    }
  }
  if (grads != nullptr) {
    Real sum = 0.0;
    for (Real g : grad_out) sum += g;
    (*grads)[decoder_bias_](0, 0) += sum;
    (*grads)[decoder_weight_].noalias() += cache.masked.transpose() * d_basis;
  }
  const Mat d_masked = d_basis * store[decoder_weight_].transpose();
  const Eigen::Index common = cache.common;

  Mat d_encoded = Mat::Zero(cache.encoded.rows(), cache.encoded.cols());
  d_encoded.topRows(common) = d_masked.cwiseProduct(cache.mask.topRows(common));
  d_encoded = (cache.encoded.array() > 0.0).select(d_encoded, 0.0);
  if (grads != nullptr) {
    (*grads)[encoder_.weight()].noalias() += d_encoded.transpose() * cache.frames;
    (*grads)[encoder_.bias()] += d_encoded.colwise().sum();
  }

  Mat d_mask = Mat::Zero(cache.mask.rows(), cache.mask.cols());
  d_mask.topRows(common) = d_masked.cwiseProduct(cache.encoded.topRows(common));
  d_mask = (cache.mask.array() > 0.0).select(d_mask, 0.0);
  return mask_proj_.Backward(store, z, d_mask, grads);
}

PvadHead::PvadHead(ParamStore* store, const std::string& name, int in_dim, std::uint64_t seed) {
  classifier_ = Linear(store, name + ".classifier", in_dim, kNumFrameClasses, seed);
}

Mat PvadHead::Logits(const ParamStore& store, const Mat& z) const {
  return classifier_.Forward(store, z);
}

Mat PvadHead::Forward(const ParamStore& store, const Mat& z) const {
  return RowSoftmax(Logits(store, z));
}

Mat PvadHead::Backward(const ParamStore& store, const Mat& z, const Mat& grad_logits,
                       Grads* grads) const {
  return classifier_.Backward(store, z, grad_logits, grads);
}

Real CrossEntropy(const Mat& posteriors, const std::vector<FrameLabel>& labels, Mat* grad_logits) {
  if (posteriors.rows() != static_cast<Eigen::Index>(labels.size()))
    throw DataError("cross entropy: " + std::to_string(posteriors.rows()) + " frames vs " +
                    std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw DataError("cross entropy: no frames");
  const auto frames = static_cast<Real>(labels.size());
  Real loss = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const Real p = posteriors(static_cast<Eigen::Index>(t), static_cast<int>(labels[t]));
    loss -= std::log(std::max(p, 1e-300));
  }
  if (grad_logits != nullptr) {
    *grad_logits = posteriors / frames;
    for (std::size_t t = 0; t < labels.size(); ++t)
      (*grad_logits)(static_cast<Eigen::Index>(t), static_cast<int>(labels[t])) -= 1.0 / frames;
  }
  return loss / frames;
}

AsrHead::AsrHead(ParamStore* store, const std::string& name, int in_dim, int hidden,
                 std::uint64_t seed) {
  blstm_ = Blstm(store, name + ".blstm", in_dim, hidden, seed);
  output_ = Linear(store, name + ".output", 2 * hidden, kVocabSize, seed);
}

Mat AsrHead::Forward(const ParamStore& store, const Mat& z, AsrHeadCache* cache) const {
  AsrHeadCache local;
  AsrHeadCache& c = cache != nullptr ? *cache : local;
  c.hidden = blstm_.Forward(store, z, &c.blstm);
  return output_.Forward(store, c.hidden);
}

Mat AsrHead::Backward(const ParamStore& store, const Mat& z, const AsrHeadCache& cache,
                      const Mat& grad_logits, Grads* grads) const {
  Mat d_hidden = output_.Backward(store, cache.hidden, grad_logits, grads);
  return blstm_.Backward(store, z, cache.blstm, d_hidden, grads);
}

}  // namespace tsb
