// include/tsb/target_encoder.h

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

#ifndef TSB_TARGET_ENCODER_H_
#define TSB_TARGET_ENCODER_H_

#include <cstdint>
#include <vector>

#include "tsb/layers.h"
#include "tsb/tensor.h"
#include "tsb/upstream.h"

namespace tsb {

struct EncoderConfig {
  int num_layers = 5;     // upstream layers + 1
  int dim = 64;           // upstream feature width D
  int hidden = 512;       // BLSTM hidden size H (outputs are 2H wide)
  int embed_dim = 256;    // speaker embedding size
  int heads = 4;
  int compress_dim = 128;
  std::uint64_t seed = 1;
};

struct MhfaCache {
  Mat key_in, value_in;  // T x D weighted sums
  Mat keys, values;      // T x dc compressed
  Mat attn;              // T x heads, columns sum to 1
  Mat pooled;            // 1 x heads*dc
};

// Multi-head factorized attention pooling. Keys and values come from separate
// layer-weighted sums of the enrollment stack, each compressed to dc dims.
// Head h scores frame t with q_h . k_t; the softmax over time weights the
// compressed values, and the concatenated per-head pools are mapped to the
// embedding.
class Mhfa {
 public:
  Mhfa() = default;
  Mhfa(ParamStore* store, const std::string& name, const EncoderConfig& config);

  RowVec Forward(const ParamStore& store, const LayerStack& stack, MhfaCache* cache) const;
  void Backward(const ParamStore& store, const LayerStack& stack, const MhfaCache& cache,
                const RowVec& grad_e, Grads* grads, std::vector<Mat>* grad_stack) const;

  const LayerMixer& key_mixer() const { return key_mixer_; }
  const LayerMixer& value_mixer() const { return value_mixer_; }
  ParamId queries() const { return queries_; }
  const Linear& key_compress() const { return key_compress_; }
  const Linear& value_compress() const { return value_compress_; }
  const Linear& output() const { return output_; }

 private:
  LayerMixer key_mixer_, value_mixer_;
  Linear key_compress_, value_compress_, output_;
  ParamId queries_;  // heads x dc
  int heads_ = 0, compress_dim_ = 0;
};

// fused[t] = m[t] .* p
Mat BroadcastMultiply(const Mat& m, const RowVec& p);

struct EncoderCache {
  MhfaCache mhfa;
  RowVec e;
  Mat mixed;  // T x D
  BlstmCache mix_blstm;
  Mat m;      // T x 2H
  RowVec proj;
  Mat fused;
  BlstmCache ext0, ext1;
  Mat z0;
};

// Shared target speech encoder: SpkEnc (MHFA) over the enrollment stack and
// the extractor over the mixture stack, fused by broadcast multiplication.
class TargetEncoder {
 public:
  TargetEncoder() = default;
  // Registers "<name>.*" tensors.
  TargetEncoder(ParamStore* store, const std::string& name, const EncoderConfig& config);

  RowVec Embed(const ParamStore& store, const LayerStack& enroll, MhfaCache* cache) const;
  // Z_x (T x 2H). `forced_proj`, when given, replaces proj(e).
  Mat Encode(const ParamStore& store, const LayerStack& mix, const RowVec& e, EncoderCache* cache,
             const RowVec* forced_proj = nullptr) const;
  // Full pass: Embed followed by Encode, with everything cached.
  Mat Forward(const ParamStore& store, const LayerStack& mix, const LayerStack& enroll,
              EncoderCache* cache) const;
  // Backward of Forward. Stack gradients are produced only when the pointers
  // are non-null (upstream fine-tuning).
  void Backward(const ParamStore& store, const LayerStack& mix, const LayerStack& enroll,
                const EncoderCache& cache, const Mat& grad_z, Grads* grads,
                std::vector<Mat>* grad_mix, std::vector<Mat>* grad_enroll) const;

  const EncoderConfig& config() const { return config_; }
  const Mhfa& mhfa() const { return mhfa_; }
  const LayerMixer& extractor_mixer() const { return extractor_mixer_; }
  const Linear& spk_proj() const { return spk_proj_; }

 private:
  EncoderConfig config_;
  Mhfa mhfa_;
  LayerMixer extractor_mixer_;
  Blstm mix_blstm_, ext0_, ext1_;
  Linear spk_proj_;
};

}  // namespace tsb

#endif  // TSB_TARGET_ENCODER_H_
