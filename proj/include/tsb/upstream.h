// include/tsb/upstream.h

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

#ifndef TSB_UPSTREAM_H_
#define TSB_UPSTREAM_H_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsb/audio.h"
#include "tsb/layers.h"
#include "tsb/tensor.h"

namespace tsb {

struct UpstreamConfig {
  int layers = 4;             // transformer-style blocks; the stack holds layers + 1 entries
  int dim = 64;
  int frontend_channels = 32;
  int ff_dim = 128;
  std::uint64_t seed = 1234;
};

// Intermediate values of one toy upstream pass, kept for backprop when the
// upstream is fine-tuned.
struct UpstreamCache {
  Mat frames;        // (T*20) x 16 input patches
  Mat conv1;         // (T*20) x C, post-tanh
  Mat conv2_in;      // T x (20*C)
  struct Block {
    Mat q, k, v, attn, ctx, h1, ff_hidden;
  };
  std::vector<Block> blocks;
};

// Deterministic stand-in for a pretrained SSL model. A two stage strided
// convolutional front-end (strides 16 and 20) produces layer 0 on a 320-sample
// frame grid; each further layer is a residual single-head self-attention plus
// feed-forward block. The waveform is zero padded to T * 320 samples with
// T = ceil(len / 320).
class ToyUpstream {
 public:
  static constexpr int kStride1 = 16;
  static constexpr int kStride2 = 20;

  ToyUpstream() = default;
  // Registers "upstream.*" tensors in `store`.
  ToyUpstream(ParamStore* store, const UpstreamConfig& config);

  LayerStack Forward(const ParamStore& store, const AudioSignal& wave,
                     UpstreamCache* cache = nullptr) const;
  // Accumulates parameter gradients for d loss / d stack.
  void Backward(const ParamStore& store, const LayerStack& stack, const UpstreamCache& cache,
                const std::vector<Mat>& grad_stack, Grads* grads) const;

  const UpstreamConfig& config() const { return config_; }
  // Number of Forward calls since construction or the last reset.
  long calls() const { return calls_.load(); }
  void ResetCalls() { calls_.store(0); }

  ToyUpstream(const ToyUpstream& other)
      : config_(other.config_), conv1_(other.conv1_), conv2_(other.conv2_),
        blocks_(other.blocks_), calls_(other.calls_.load()) {}
  ToyUpstream& operator=(const ToyUpstream& other) {
    config_ = other.config_;
    conv1_ = other.conv1_;
    conv2_ = other.conv2_;
    blocks_ = other.blocks_;
    calls_.store(other.calls_.load());
    return *this;
  }

 private:
  struct Block {
    Linear q, k, v, o, ff1, ff2;
  };
  UpstreamConfig config_;
  Linear conv1_, conv2_;
  std::vector<Block> blocks_;
  mutable std::atomic<long> calls_{0};
};

// Learnable softmax-weighted sum over the layers of a stack. Logits start at
// zero, i.e. uniform weights.
class LayerMixer {
 public:
  LayerMixer() = default;
  LayerMixer(ParamStore* store, const std::string& name, int num_layers);

  RowVec Weights(const ParamStore& store) const;
  Mat Forward(const ParamStore& store, const LayerStack& stack) const;
  // Adds d loss / d logits to `grads`; if `grad_stack` is non-null its entries
  // (resized on first use) receive d loss / d layer.
  void Backward(const ParamStore& store, const LayerStack& stack, const Mat& grad_out, Grads* grads,
                std::vector<Mat>* grad_stack) const;

  ParamId logits() const { return logits_; }
  int num_layers() const { return num_layers_; }

 private:
  ParamId logits_;
  int num_layers_ = 0;
};

// Softmax of a logit vector, exposed for checkpoint inspection.
RowVec LayerWeightsFromLogits(const RowVec& logits);

// TSFB1: "TSFB", u32 version (1), u32 layers, u32 frames, u32 dim, then
// layers * frames * dim little-endian float32 values, layer-major.
inline constexpr std::uint32_t kTsfbVersion = 1;
void WriteFeatures(const std::filesystem::path& path, const LayerStack& stack);
LayerStack ReadFeatures(const std::filesystem::path& path);

}  // namespace tsb

#endif  // TSB_UPSTREAM_H_
