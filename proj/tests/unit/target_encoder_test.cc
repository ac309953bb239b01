// tests/unit/target_encoder_test.cc

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

#include <cmath>

#include "catch_amalgamated.hpp"
#include "fixtures.h"
#include "gen.h"
#include "tsb/errors.h"
#include "tsb/model.h"
#include "tsb/target_encoder.h"

namespace tsb {
namespace {

using testing::Gen;

LayerStack RandomStack(Gen& gen, int layers, int frames, int dim) {
  LayerStack s;
  for (int l = 0; l < layers; ++l) s.layers.push_back(gen.Matrix(frames, dim));
  return s;
}

EncoderConfig SmallEncoder() {
  EncoderConfig c;
  c.num_layers = 3;
  c.dim = 8;
  c.hidden = 4;
  c.embed_dim = 6;
  c.heads = 2;
  c.compress_dim = 3;
  c.seed = 2;
  return c;
}

TEST_CASE("MHFA closed form on two frames", "[encoder]") {
  EncoderConfig c;
  c.num_layers = 1;
  c.dim = 1;
  c.embed_dim = 1;
  c.heads = 1;
  c.compress_dim = 1;
  ParamStore store;
  const Mhfa mhfa(&store, "mhfa", c);
  const double wk = 0.7, bk = -0.2, wv = 1.3, bv = 0.4, q = 2.0, wo = -0.8, bo = 0.1;
  store[mhfa.key_compress().weight()](0, 0) = wk;
  store[mhfa.key_compress().bias()](0, 0) = bk;
  store[mhfa.value_compress().weight()](0, 0) = wv;
  store[mhfa.value_compress().bias()](0, 0) = bv;
  store[mhfa.queries()](0, 0) = q;
  store[mhfa.output().weight()](0, 0) = wo;
  store[mhfa.output().bias()](0, 0) = bo;

  const double x1 = 0.5, x2 = -1.5;
  LayerStack s;
  s.layers.push_back((Mat(2, 1) << x1, x2).finished());
  const double s1 = q * (wk * x1 + bk), s2 = q * (wk * x2 + bk);
  const double a1 = 1.0 / (1.0 + std::exp(s2 - s1));
  const double pooled = a1 * (wv * x1 + bv) + (1.0 - a1) * (wv * x2 + bv);
  MhfaCache cache;
  const RowVec e = mhfa.Forward(store, s, &cache);
  CHECK(cache.pooled(0, 0) == Catch::Approx(pooled).margin(1e-14));
  CHECK(e(0) == Catch::Approx(wo * pooled + bo).margin(1e-14));
}

TEST_CASE("MHFA attention and time-constant input", "[encoder]") {
  Gen gen(3);
  ParamStore store;
  const EncoderConfig c = SmallEncoder();
  const Mhfa mhfa(&store, "mhfa", c);
  MhfaCache cache;
  mhfa.Forward(store, RandomStack(gen, 3, 9, 8), &cache);
  for (Eigen::Index h = 0; h < cache.attn.cols(); ++h) CHECK(std::abs(cache.attn.col(h).sum() - 1.0) < 1e-12);

  LayerStack one, many;
  for (int l = 0; l < 3; ++l) {
    const Mat frame = gen.Matrix(1, 8);
    one.layers.push_back(frame);
    many.layers.push_back(frame.replicate(17, 1));
  }
  const RowVec a = mhfa.Forward(store, one, nullptr), b = mhfa.Forward(store, many, nullptr);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  LayerStack empty;
  for (int l = 0; l < 3; ++l) empty.layers.push_back(Mat(0, 8));
  CHECK_THROWS_AS(mhfa.Forward(store, empty, nullptr), DataError);
}

TEST_CASE("Broadcast multiplication", "[encoder]") {
  const Mat m = (Mat(1, 2) << 1, 2).finished();
  const RowVec p = (RowVec(2) << 2, 0.5).finished();
  const Mat f = BroadcastMultiply(m, p);
  CHECK(f(0, 0) == 2.0);
  CHECK(f(0, 1) == 1.0);

  Gen gen(4);
  const Mat big = gen.Matrix(6, 5);
  const RowVec q = gen.Matrix(1, 5);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
  perm.indices() << 3, 0, 5, 1, 4, 2;
  CHECK(BroadcastMultiply(perm * big, q) == perm * BroadcastMultiply(big, q));
}

TEST_CASE("Forced speaker projections", "[encoder]") {
  Gen gen(5);
  ParamStore store;
  const EncoderConfig c = SmallEncoder();
  const TargetEncoder enc(&store, "encoder", c);
  const LayerStack mix = RandomStack(gen, 3, 7, 8), enroll = RandomStack(gen, 3, 5, 8);
  const RowVec e = enc.Embed(store, enroll, nullptr);
  REQUIRE(e.cols() == 6);

  const RowVec ones = RowVec::Ones(2 * c.hidden);
  EncoderCache cache;
  enc.Encode(store, mix, e, &cache, &ones);
  CHECK(cache.fused == cache.m);

  const RowVec zeros = RowVec::Zero(2 * c.hidden);
  EncoderCache z1, z2;
  const Mat a = enc.Encode(store, mix, e, &z1, &zeros);
  const Mat b = enc.Encode(store, RandomStack(gen, 3, 7, 8), e, &z2, &zeros);
  CHECK(z1.fused.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a == b);

  CHECK_THROWS_AS(enc.Encode(store, mix, RowVec::Zero(5), nullptr), DataError);
  const Mat z = enc.Forward(store, mix, enroll, &cache);
  CHECK(z.rows() == 7);
  CHECK(z.cols() == 2 * c.hidden);
}

TEST_CASE("Different enrollments give different embeddings", "[encoder]") {
  Gen gen(6);
  ParamStore store;
  const TargetEncoder enc(&store, "encoder", SmallEncoder());
  for (int k = 0; k < 10; ++k) {
    const RowVec a = enc.Embed(store, RandomStack(gen, 3, 8, 8), nullptr);
    const RowVec b = enc.Embed(store, RandomStack(gen, 3, 8, 8), nullptr);
    REQUIRE((a - b).norm() > 0.0);
  }
}

TEST_CASE("Separate layer weights per consumer", "[encoder]") {
  ParamStore store;
  const TargetEncoder enc(&store, "encoder", SmallEncoder());
  const ParamId ids[] = {enc.extractor_mixer().logits(), enc.mhfa().key_mixer().logits(),
                         enc.mhfa().value_mixer().logits()};
  CHECK(ids[0].index != ids[1].index);
  CHECK(ids[1].index != ids[2].index);
  CHECK(ids[0].index != ids[2].index);
  store[ids[1]](0, 0) = 3.0;
  CHECK(enc.extractor_mixer().Weights(store)(0) == Catch::Approx(1.0 / 3.0));
  CHECK(enc.mhfa().value_mixer().Weights(store)(0) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("Upstream runs twice per example", "[encoder]") {
  Gen gen(7);
  TaskModel model(Task::kTse, testing::TinyModelConfig());
  const Example ex = testing::RandomExample(gen, 1600);
  Grads grads(model.store());
  model.ForwardBackward(ex, 1.0, false, &grads);
  CHECK(model.upstream().calls() == 2);
  model.Predict(ex, SubTask::kTse);
  CHECK(model.upstream().calls() == 4);
}

TEST_CASE("Hidden sizes per task", "[encoder]") {
  ModelConfig c;
  CHECK(c.ResolvedHidden(Task::kTse) == 512);
  CHECK(c.ResolvedHidden(Task::kPvad) == 32);
  c.hidden = 16;
  CHECK(c.ResolvedHidden(Task::kPvad) == 16);
}

}  // namespace
}  // namespace tsb
