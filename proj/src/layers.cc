// src/layers.cc

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

#include "tsb/layers.h"

#include <cmath>

#include "tsb/errors.h"
#include "tsb/seed.h"

namespace tsb {

Mat RowSoftmax(const Mat& x) {
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Real m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

RowVec Softmax(const RowVec& x) {
  const Real m = x.maxCoeff();
  RowVec y = (x.array() - m).exp();
  return y / y.sum();
}

Mat RowSoftmaxBackward(const Mat& y, const Mat& grad_y) {
  Mat g(y.rows(), y.cols());
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const Real dot = y.row(r).dot(grad_y.row(r));
    g.row(r) = y.row(r).array() * (grad_y.row(r).array() - dot);
  }
  return g;
}

Linear::Linear(ParamStore* store, const std::string& name, int in, int out, std::uint64_t seed)
    : in_(in), out_(out) {
  weight_ = store->Add(name + ".weight", out, in);
  bias_ = store->Add(name + ".bias", 1, out);
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(in));
  InitUniform(&(*store)[weight_], bound, DeriveSeed(seed, name + ".weight"));
  InitUniform(&(*store)[bias_], bound, DeriveSeed(seed, name + ".bias"));
}

Mat Linear::Forward(const ParamStore& store, const Mat& x) const {
  if (x.cols() != in_)
    throw DataError("linear: expected " + std::to_string(in_) + " input columns, got " +
                    std::to_string(x.cols()));
  Mat y = x * store[weight_].transpose();
  y.rowwise() += store[bias_].row(0);
  return y;
}

Mat Linear::Backward(const ParamStore& store, const Mat& x, const Mat& grad_y,
                     Grads* grads) const {
  if (grads != nullptr) {
    (*grads)[weight_].noalias() += grad_y.transpose() * x;
    (*grads)[bias_] += grad_y.colwise().sum();
  }
  return grad_y * store[weight_];
}

namespace {

inline Real Sigmoid(Real z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Lstm::Lstm(ParamStore* store, const std::string& name, int in, int hidden, bool reverse,
           std::uint64_t seed)
    : in_(in), hidden_(hidden), reverse_(reverse) {
  w_input_ = store->Add(name + ".w_input", 4 * hidden, in);
  w_hidden_ = store->Add(name + ".w_hidden", 4 * hidden, hidden);
  bias_ = store->Add(name + ".bias", 1, 4 * hidden);
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(hidden));
  InitUniform(&(*store)[w_input_], bound, DeriveSeed(seed, name + ".w_input"));
  InitUniform(&(*store)[w_hidden_], bound, DeriveSeed(seed, name + ".w_hidden"));
  InitUniform(&(*store)[bias_], bound, DeriveSeed(seed, name + ".bias"));
  (*store)[bias_].middleCols(hidden, hidden).array() += 1.0;
}

Mat Lstm::Forward(const ParamStore& store, const Mat& x, LstmCache* cache) const {
  if (x.cols() != in_)
    throw DataError("lstm: expected " + std::to_string(in_) + " input columns, got " +
                    std::to_string(x.cols()));
  const Eigen::Index steps = x.rows();
  const int h = hidden_;
  Mat pre = x * store[w_input_].transpose();
  pre.rowwise() += store[bias_].row(0);
  const Mat& wh = store[w_hidden_];

  Mat gates(steps, 4 * h), cells(steps, h), hidden(steps, h);
  RowVec h_prev = RowVec::Zero(h), c_prev = RowVec::Zero(h);
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::Index t = reverse_ ? steps - 1 - k : k;
    RowVec z = pre.row(t);
    z.noalias() += h_prev * wh.transpose();
    for (int j = 0; j < h; ++j) {
      gates(t, j) = Sigmoid(z[j]);
      gates(t, h + j) = Sigmoid(z[h + j]);
      gates(t, 2 * h + j) = std::tanh(z[2 * h + j]);
      gates(t, 3 * h + j) = Sigmoid(z[3 * h + j]);
      const Real c = gates(t, h + j) * c_prev[j] + gates(t, j) * gates(t, 2 * h + j);
      cells(t, j) = c;
      hidden(t, j) = gates(t, 3 * h + j) * std::tanh(c);
    }
    h_prev = hidden.row(t);
    c_prev = cells.row(t);
  }
  if (cache != nullptr) {
    cache->gates = std::move(gates);
    cache->cells = std::move(cells);
    cache->hidden = hidden;
  }
  return hidden;
}

Mat Lstm::Backward(const ParamStore& store, const Mat& x, const LstmCache& cache,
                   const Mat& grad_h, Grads* grads) const {
  const Eigen::Index steps = x.rows();
  const int h = hidden_;
  const Mat& wh = store[w_hidden_];
  Mat dz(steps, 4 * h);
  RowVec dh_next = RowVec::Zero(h), dc_next = RowVec::Zero(h);
  Mat grad_wh = Mat::Zero(4 * h, h);

  for (Eigen::Index k = steps - 1; k >= 0; --k) {
    const Eigen::Index t = reverse_ ? steps - 1 - k : k;
    const Eigen::Index prev = reverse_ ? t + 1 : t - 1;
    const bool has_prev = k > 0;
    RowVec dh = grad_h.row(t) + dh_next;
    for (int j = 0; j < h; ++j) {
      const Real i_g = cache.gates(t, j), f_g = cache.gates(t, h + j);
      const Real g_g = cache.gates(t, 2 * h + j), o_g = cache.gates(t, 3 * h + j);
      const Real tc = std::tanh(cache.cells(t, j));
      const Real c_prev = has_prev ? cache.cells(prev, j) : 0.0;
      const Real dc = dc_next[j] + dh[j] * o_g * (1.0 - tc * tc);
      dz(t, j) = dc * g_g * i_g * (1.0 - i_g);
      dz(t, h + j) = dc * c_prev * f_g * (1.0 - f_g);
      dz(t, 2 * h + j) = dc * i_g * (1.0 - g_g * g_g);
      dz(t, 3 * h + j) = dh[j] * tc * o_g * (1.0 - o_g);
      dc_next[j] = dc * f_g;
    }
    dh_next.noalias() = dz.row(t) * wh;
    if (has_prev && grads != nullptr) grad_wh.noalias() += dz.row(t).transpose() * cache.hidden.row(prev);
  }
  if (grads != nullptr) {
    (*grads)[w_hidden_] += grad_wh;
    (*grads)[w_input_].noalias() += dz.transpose() * x;
    (*grads)[bias_] += dz.colwise().sum();
  }
  return dz * store[w_input_];
}

Blstm::Blstm(ParamStore* store, const std::string& name, int in, int hidden, std::uint64_t seed)
    : forward_(store, name + ".fwd", in, hidden, false, seed),
      backward_(store, name + ".bwd", in, hidden, true, seed) {}

Mat Blstm::Forward(const ParamStore& store, const Mat& x, BlstmCache* cache) const {
  Mat f = forward_.Forward(store, x, cache ? &cache->forward : nullptr);
  Mat b = backward_.Forward(store, x, cache ? &cache->backward : nullptr);
  Mat y(x.rows(), f.cols() + b.cols());
  y << f, b;
  return y;
}

Mat Blstm::Backward(const ParamStore& store, const Mat& x, const BlstmCache& cache,
                    const Mat& grad_y, Grads* grads) const {
  const int h = forward_.hidden();
  Mat gx = forward_.Backward(store, x, cache.forward, grad_y.leftCols(h), grads);
  gx += backward_.Backward(store, x, cache.backward, grad_y.rightCols(h), grads);
  return gx;
}

}  // namespace tsb
