// include/tsb/heads.h

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

#ifndef TSB_HEADS_H_
#define TSB_HEADS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsb/audio.h"
#include "tsb/layers.h"
#include "tsb/mixture.h"
#include "tsb/tensor.h"

namespace tsb {

inline constexpr int kMaskKernel = 1024;
inline constexpr int kMaskStride = 320;
inline constexpr int kMaskFilters = 512;
inline constexpr int kMaskPad = (kMaskKernel - kMaskStride) / 2;  // 352

struct MaskHeadCache {
  std::size_t length = 0;
  Mat frames;   // F x 1024 padded waveform patches
  Mat encoded;  // F x 512, post-ReLU
  Mat mask;     // T x 512, post-ReLU
  Mat masked;   // Tc x 512
  Eigen::Index common = 0;
};

// Time-domain masking head shared by TSE and PSE. A strided 1-D conv encodes
// the mixture, a ReLU mask is predicted from Z_x, and a transposed conv with
// overlap-add reconstructs the masked signal.
class MaskHead {
 public:
  MaskHead() = default;
  MaskHead(ParamStore* store, const std::string& name, int in_dim, std::uint64_t seed);

  // Number of encoder frames for a waveform of `length` samples.
  static Eigen::Index NumFrames(std::size_t length);

  // `forced_mask`, when given, replaces ReLU(proj(Z_x)) (T x 512).
  std::vector<Real> Forward(const ParamStore& store, std::span<const Real> y, const Mat& z,
                            MaskHeadCache* cache, const Mat* forced_mask = nullptr) const;
  // Returns d loss / d Z_x.
  Mat Backward(const ParamStore& store, const Mat& z, const MaskHeadCache& cache,
               std::span<const Real> grad_out, Grads* grads) const;

  const Linear& encoder() const { return encoder_; }
  const Linear& mask_proj() const { return mask_proj_; }
  ParamId decoder_weight() const { return decoder_weight_; }
  ParamId decoder_bias() const { return decoder_bias_; }

 private:
  Linear encoder_;    // 1024 -> 512 over waveform patches
  Linear mask_proj_;  // 2H -> 512
  ParamId decoder_weight_;  // 512 x 1024 basis
  ParamId decoder_bias_;    // 1 x 1
};

// Frame classifier over {tss, ntss, ns}.
class PvadHead {
 public:
  PvadHead() = default;
  PvadHead(ParamStore* store, const std::string& name, int in_dim, std::uint64_t seed);

  // T x 3 posteriors.
  Mat Forward(const ParamStore& store, const Mat& z) const;
  Mat Backward(const ParamStore& store, const Mat& z, const Mat& grad_logits, Grads* grads) const;
  Mat Logits(const ParamStore& store, const Mat& z) const;

  const Linear& classifier() const { return classifier_; }

 private:
  Linear classifier_;
};

// Mean frame cross-entropy of row-stochastic posteriors against labels. If
// `grad_logits` is non-null it receives the gradient with respect to the
// pre-softmax logits.
Real CrossEntropy(const Mat& posteriors, const std::vector<FrameLabel>& labels,
                  Mat* grad_logits = nullptr);

struct AsrHeadCache {
  BlstmCache blstm;
  Mat hidden;
};

// BLSTM decoder followed by a projection to the character vocabulary.
class AsrHead {
 public:
  AsrHead() = default;
  AsrHead(ParamStore* store, const std::string& name, int in_dim, int hidden, std::uint64_t seed);

  Mat Forward(const ParamStore& store, const Mat& z, AsrHeadCache* cache) const;
  Mat Backward(const ParamStore& store, const Mat& z, const AsrHeadCache& cache,
               const Mat& grad_logits, Grads* grads) const;

 private:
  Blstm blstm_;
  Linear output_;
};

}  // namespace tsb

#endif  // TSB_HEADS_H_
