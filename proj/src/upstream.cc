// src/upstream.cc

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

#include "tsb/upstream.h"

#include <cmath>
#include <cstring>
#include <fstream>

#include "tsb/errors.h"
#include "tsb/seed.h"

namespace tsb {

namespace {

void Orthogonalize(ParamStore* store, const Linear& layer, Real gain, std::uint64_t seed) {
  InitOrthogonal(&(*store)[layer.weight()], gain, seed);
  (*store)[layer.bias()].setZero();
}

Mat TanhBackward(const Mat& y, const Mat& grad_y) {
  return grad_y.array() * (1.0 - y.array().square());
}

}  // namespace

ToyUpstream::ToyUpstream(ParamStore* store, const UpstreamConfig& config) : config_(config) {
  if (config.layers < 1 || config.dim < 1 || config.frontend_channels < 1 || config.ff_dim < 1)
    throw UsageError("toy upstream: layers, dim, frontend_channels and ff_dim must be positive");
  const int c = config.frontend_channels, d = config.dim;
  const std::uint64_t seed = config.seed;
  conv1_ = Linear(store, "upstream.conv1", kStride1, c, seed);
  conv2_ = Linear(store, "upstream.conv2", kStride2 * c, d, seed);
  Orthogonalize(store, conv1_, 4.0, DeriveSeed(seed, "upstream.conv1"));
  Orthogonalize(store, conv2_, 1.0, DeriveSeed(seed, "upstream.conv2"));
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = "upstream.block" + std::to_string(l);
    Block b;
    b.q = Linear(store, p + ".q", d, d, seed);
    b.k = Linear(store, p + ".k", d, d, seed);
    b.v = Linear(store, p + ".v", d, d, seed);
    b.o = Linear(store, p + ".o", d, d, seed);
    b.ff1 = Linear(store, p + ".ff1", d, config.ff_dim, seed);
    b.ff2 = Linear(store, p + ".ff2", config.ff_dim, d, seed);
    Orthogonalize(store, b.q, 1.0, DeriveSeed(seed, p + ".q"));
    Orthogonalize(store, b.k, 1.0, DeriveSeed(seed, p + ".k"));
    Orthogonalize(store, b.v, 1.0, DeriveSeed(seed, p + ".v"));
    Orthogonalize(store, b.o, 0.5, DeriveSeed(seed, p + ".o"));
    Orthogonalize(store, b.ff1, 1.0, DeriveSeed(seed, p + ".ff1"));
    Orthogonalize(store, b.ff2, 0.5, DeriveSeed(seed, p + ".ff2"));
    blocks_.push_back(b);
  }
}

LayerStack ToyUpstream::Forward(const ParamStore& store, const AudioSignal& wave,
                                UpstreamCache* cache) const {
  if (wave.size() < static_cast<std::size_t>(kStride1 * kStride2))
    throw DataError("toy upstream: waveform shorter than one 320-sample frame");
  calls_.fetch_add(1);
  const int c = config_.frontend_channels;
  const Eigen::Index frames = static_cast<Eigen::Index>((wave.size() + 319) / 320);
  const Eigen::Index patches = frames * kStride2;

  Mat x = Mat::Zero(patches, kStride1);
  std::memcpy(x.data(), wave.samples().data(), wave.size() * sizeof(Real));
  Mat a1 = conv1_.Forward(store, x).array().tanh();
  Mat a1r = Eigen::Map<const Mat>(a1.data(), frames, kStride2 * c);

  LayerStack stack;
  stack.layers.push_back(conv2_.Forward(store, a1r).array().tanh());
  const Real scale = 1.0 / std::sqrt(static_cast<Real>(config_.dim));
  if (cache != nullptr) cache->blocks.clear();
  for (const Block& b : blocks_) {
    const Mat& h = stack.layers.back();
    Mat q = b.q.Forward(store, h), k = b.k.Forward(store, h), v = b.v.Forward(store, h);
    Mat attn = RowSoftmax((q * k.transpose()) * scale);
    Mat ctx = attn * v;
    Mat h1 = h + b.o.Forward(store, ctx);
    Mat ff_hidden = b.ff1.Forward(store, h1).array().tanh();
    stack.layers.push_back(h1 + b.ff2.Forward(store, ff_hidden));
    if (cache != nullptr) {
      cache->blocks.push_back(UpstreamCache::Block{std::move(q), std::move(k), std::move(v),
                                                   std::move(attn), std::move(ctx), std::move(h1),
                                                   std::move(ff_hidden)});
    }
  }
  if (cache != nullptr) {
    cache->frames = std::move(x);
    cache->conv1 = std::move(a1);
    cache->conv2_in = std::move(a1r);
  }
  return stack;
}

void ToyUpstream::Backward(const ParamStore& store, const LayerStack& stack,
                           const UpstreamCache& cache, const std::vector<Mat>& grad_stack,
                           Grads* grads) const {
  const int num_blocks = static_cast<int>(blocks_.size());
  const Real scale = 1.0 / std::sqrt(static_cast<Real>(config_.dim));
  Mat g = grad_stack.at(num_blocks);
  for (int l = num_blocks - 1; l >= 0; --l) {
    const Block& b = blocks_[l];
    const UpstreamCache::Block& c = cache.blocks[l];
    const Mat& h = stack.layers[l];
    // Feed-forward residual.
    Mat d_hidden = b.ff2.Backward(store, c.ff_hidden, g, grads);
    Mat d_h1 = g + b.ff1.Backward(store, c.h1, TanhBackward(c.ff_hidden, d_hidden), grads);
    // Attention residual.
    Mat d_ctx = b.o.Backward(store, c.ctx, d_h1, grads);
    Mat d_attn = d_ctx * c.v.transpose();
    Mat d_v = c.attn.transpose() * d_ctx;
    Mat d_scores = RowSoftmaxBackward(c.attn, d_attn) * scale;
    Mat d_q = d_scores * c.k;
    Mat d_k = d_scores.transpose() * c.q;
    g = d_h1;
    g += b.q.Backward(store, h, d_q, grads);
    g += b.k.Backward(store, h, d_k, grads);
    g += b.v.Backward(store, h, d_v, grads);
    g += grad_stack.at(l);
  }
  Mat d_a1r = conv2_.Backward(store, cache.conv2_in, TanhBackward(stack.layers[0], g), grads);
  Mat d_a1 = Eigen::Map<const Mat>(d_a1r.data(), cache.conv1.rows(), cache.conv1.cols());
  conv1_.Backward(store, cache.frames, TanhBackward(cache.conv1, d_a1), grads);
}

RowVec LayerWeightsFromLogits(const RowVec& logits) { return Softmax(logits); }

LayerMixer::LayerMixer(ParamStore* store, const std::string& name, int num_layers)
    : num_layers_(num_layers) {
  logits_ = store->Add(name + ".logits", 1, num_layers);
}

RowVec LayerMixer::Weights(const ParamStore& store) const {
  return LayerWeightsFromLogits(store[logits_].row(0));
}

Mat LayerMixer::Forward(const ParamStore& store, const LayerStack& stack) const {
  if (stack.NumLayers() != num_layers_)
    throw DataError("layer weights expect " + std::to_string(num_layers_) + " layers, stack has " +
                    std::to_string(stack.NumLayers()));
  const RowVec w = Weights(store);
  Mat out = w[0] * stack.layers[0];
  for (int l = 1; l < num_layers_; ++l) {
    if (stack.layers[l].rows() != out.rows() || stack.layers[l].cols() != out.cols())
      throw DataError("layer stack entries differ in shape");
    out += w[l] * stack.layers[l];
  }
  return out;
}

void LayerMixer::Backward(const ParamStore& store, const LayerStack& stack, const Mat& grad_out,
                          Grads* grads, std::vector<Mat>* grad_stack) const {
  const RowVec w = Weights(store);
  if (grads != nullptr) {
    RowVec gw(num_layers_);
    for (int l = 0; l < num_layers_; ++l) gw[l] = (stack.layers[l].array() * grad_out.array()).sum();
    const Real dot = w.dot(gw);
    (*grads)[logits_].row(0) += (w.array() * (gw.array() - dot)).matrix();
  }
  if (grad_stack != nullptr) {
    if (grad_stack->empty()) {
      for (int l = 0; l < num_layers_; ++l)
        grad_stack->push_back(Mat::Zero(grad_out.rows(), grad_out.cols()));
    }
    for (int l = 0; l < num_layers_; ++l) (*grad_stack)[l] += w[l] * grad_out;
  }
}

namespace {

void PutU32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t GetU32(std::istream& is, const char* field) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw DataError(std::string("TSFB1 header truncated at field '") + field + "'");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void WriteFeatures(const std::filesystem::path& path, const LayerStack& stack) {
  if (stack.NumLayers() < 1 || stack.Frames() < 1 || stack.Dim() < 1)
    throw DataError("cannot write an empty layer stack");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write("TSFB", 4);
  PutU32(os, kTsfbVersion);
  PutU32(os, static_cast<std::uint32_t>(stack.NumLayers()));
  PutU32(os, static_cast<std::uint32_t>(stack.Frames()));
  PutU32(os, static_cast<std::uint32_t>(stack.Dim()));
  std::vector<unsigned char> buf(static_cast<std::size_t>(stack.Frames() * stack.Dim()) * 4);
  for (const Mat& layer : stack.layers) {
    if (layer.rows() != stack.Frames() || layer.cols() != stack.Dim())
      throw DataError("layer stack entries differ in shape");
    for (Eigen::Index i = 0; i < layer.size(); ++i) {
      const float f = static_cast<float>(layer.data()[i]);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      for (int k = 0; k < 4; ++k) buf[4 * i + k] = static_cast<unsigned char>(bits >> (8 * k));
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!os) throw DataError("write failed for " + path.string());
}

LayerStack ReadFeatures(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open feature file " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "TSFB", 4) != 0)
    throw DataError(path.string() + ": bad magic (expected \"TSFB\")");
  const std::uint32_t version = GetU32(is, "version");
  if (version != kTsfbVersion)
    throw DataError(path.string() + ": unsupported version " + std::to_string(version));
  const std::uint32_t layers = GetU32(is, "layers");
  const std::uint32_t frames = GetU32(is, "frames");
  const std::uint32_t dim = GetU32(is, "dim");
  if (layers < 2) throw DataError(path.string() + ": header field 'layers' must be at least 2");
  if (frames == 0) throw DataError(path.string() + ": header field 'frames' is 0");
  if (dim == 0) throw DataError(path.string() + ": header field 'dim' is 0");

  const std::size_t per_layer = static_cast<std::size_t>(frames) * dim;
  std::vector<unsigned char> buf(per_layer * 4);
  LayerStack stack;
  for (std::uint32_t l = 0; l < layers; ++l) {
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw DataError(path.string() + ": payload shorter than header promises");
    Mat m(frames, dim);
    for (std::size_t i = 0; i < per_layer; ++i) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(buf[4 * i + k]) << (8 * k);
      float f;
      std::memcpy(&f, &bits, 4);
      if (!std::isfinite(f)) throw DataError(path.string() + ": non-finite feature value");
      m.data()[i] = f;
    }
    stack.layers.push_back(std::move(m));
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw DataError(path.string() + ": trailing bytes after payload");
  return stack;
}

}  // namespace tsb
