// include/tsb/layers.h

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

#ifndef TSB_LAYERS_H_
#define TSB_LAYERS_H_

#include <cstdint>
#include <string>

#include "tsb/tensor.h"

namespace tsb {

// Row-wise softmax with max subtraction.
Mat RowSoftmax(const Mat& x);
RowVec Softmax(const RowVec& x);

// Backward of a row-wise softmax given its output.
Mat RowSoftmaxBackward(const Mat& y, const Mat& grad_y);

// y = x W^T + b for a T x in input. W is out x in, b is 1 x out.
class Linear {
 public:
  Linear() = default;
  // Weights and bias are drawn uniformly from +-1/sqrt(in).
  Linear(ParamStore* store, const std::string& name, int in, int out, std::uint64_t seed);

  Mat Forward(const ParamStore& store, const Mat& x) const;
  // Accumulates into `grads` (if non-null) and returns d loss / d x.
  Mat Backward(const ParamStore& store, const Mat& x, const Mat& grad_y, Grads* grads) const;

  ParamId weight() const { return weight_; }
  ParamId bias() const { return bias_; }
  int in() const { return in_; }
  int out() const { return out_; }

 private:
  ParamId weight_, bias_;
  int in_ = 0, out_ = 0;
};

struct LstmCache {
  Mat gates;   // T x 4H post-activation, gate order i, f, g, o
  Mat cells;   // T x H
  Mat hidden;  // T x H
};

// Single-direction LSTM. A reverse LSTM scans from the last frame to the first
// but keeps outputs in input order.
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParamStore* store, const std::string& name, int in, int hidden, bool reverse,
       std::uint64_t seed);

  Mat Forward(const ParamStore& store, const Mat& x, LstmCache* cache) const;
  Mat Backward(const ParamStore& store, const Mat& x, const LstmCache& cache, const Mat& grad_h,
               Grads* grads) const;

  int hidden() const { return hidden_; }
  int in() const { return in_; }

 private:
  ParamId w_input_, w_hidden_, bias_;
  int in_ = 0, hidden_ = 0;
  bool reverse_ = false;
};

struct BlstmCache {
  LstmCache forward, backward;
};

// Forward and backward outputs concatenated to T x 2H.
class Blstm {
 public:
  Blstm() = default;
  Blstm(ParamStore* store, const std::string& name, int in, int hidden, std::uint64_t seed);

  Mat Forward(const ParamStore& store, const Mat& x, BlstmCache* cache) const;
  Mat Backward(const ParamStore& store, const Mat& x, const BlstmCache& cache, const Mat& grad_y,
               Grads* grads) const;

  int hidden() const { return forward_.hidden(); }

 private:
  Lstm forward_, backward_;
};

}  // namespace tsb

#endif  // TSB_LAYERS_H_
