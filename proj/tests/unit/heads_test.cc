// tests/unit/heads_test.cc

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
#include "gen.h"
#include "tsb/ctc.h"
#include "tsb/errors.h"
#include "tsb/heads.h"

namespace tsb {
namespace {

using testing::Gen;

TEST_CASE("Mask head frame count", "[heads]") {
  CHECK(MaskHead::NumFrames(16000) == 50);
  CHECK(MaskHead::NumFrames(16000) == (16000 + 704 - 1024) / 320 + 1);
  CHECK(MaskHead::NumFrames(320) == 1);
  CHECK(MaskHead::NumFrames(319) == 0);
}

TEST_CASE("Mask head keeps the input length", "[heads]") {
  Gen gen(1);
  ParamStore store;
  const MaskHead head(&store, "tse", 6, 3);
  for (int k = 0; k < 25; ++k) {
    const auto n = static_cast<std::size_t>(gen.Int(1024, 48000));
    const auto y = gen.Normals(n, 0.1);
    const Mat z = gen.Matrix(static_cast<Eigen::Index>((n + 319) / 320), 6);
    MaskHeadCache cache;
    REQUIRE(head.Forward(store, y, z, &cache).size() == n);
    REQUIRE(cache.mask.minCoeff() >= 0.0);
    REQUIRE(cache.encoded.minCoeff() >= 0.0);
  }
  CHECK_THROWS_AS(head.Forward(store, gen.Normals(300), gen.Matrix(1, 6), nullptr), DataError);
}

TEST_CASE("Mask head with forced masks", "[heads]") {
  Gen gen(2);
  ParamStore store;
  const MaskHead head(&store, "tse", 6, 3);
  const std::size_t n = 3200;
  const Eigen::Index frames = MaskHead::NumFrames(n);
  const Mat z = gen.Matrix(10, 6);

  store[head.decoder_bias()](0, 0) = 0.0;
  const Mat zero_mask = Mat::Zero(frames, kMaskFilters);
  for (Real v : head.Forward(store, gen.Normals(n), z, nullptr, &zero_mask)) REQUIRE(v == 0.0);

  // Filter j copies the j-th sample of the frame's central hop; the decoder
  // puts it back. Exact for nonnegative input under the ReLU encoder.
  store[head.encoder().weight()].setZero();
  store[head.encoder().bias()].setZero();
  store[head.decoder_weight()].setZero();
  for (int j = 0; j < kMaskStride; ++j) {
    store[head.encoder().weight()](j, kMaskPad + j) = 1.0;
    store[head.decoder_weight()](j, kMaskPad + j) = 1.0;
  }
  std::vector<Real> y(n);
  for (Real& v : y) v = gen.Unit();
  const Mat ones = Mat::Ones(frames, kMaskFilters);
  const auto out = head.Forward(store, y, z, nullptr, &ones);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(out[i] - y[i]));
  CHECK(worst <= 1e-5);
}

TEST_CASE("PVAD head posteriors", "[heads]") {
  Gen gen(3);
  ParamStore store;
  const PvadHead head(&store, "pvad", 4, 1);
  const Mat z = gen.Matrix(9, 4);
  const Mat p = head.Forward(store, z);
  for (Eigen::Index t = 0; t < p.rows(); ++t) REQUIRE(std::abs(p.row(t).sum() - 1.0) < 1e-12);

  store[head.classifier().weight()].setZero();
  store[head.classifier().bias()].setZero();
  const Mat u = head.Forward(store, z);
  CHECK((u.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  std::vector<FrameLabel> labels(9, FrameLabel::kNtss);
  CHECK(CrossEntropy(u, labels) == Catch::Approx(std::log(3.0)).margin(1e-12));
  CHECK_THROWS_AS(CrossEntropy(u, std::vector<FrameLabel>(3, FrameLabel::kNs)), DataError);
}

TEST_CASE("Cross entropy gradient", "[heads]") {
  Gen gen(4);
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    Mat logits = gen.Matrix(6, 3, 2.0);
    std::vector<FrameLabel> labels;
    for (int t = 0; t < 6; ++t) labels.push_back(static_cast<FrameLabel>(gen.Int(0, 2)));
    Mat grad;
    CrossEntropy(RowSoftmax(logits), labels, &grad);
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      const double h = 1e-5, x = logits.data()[i];
      logits.data()[i] = x + h;
      const double up = CrossEntropy(RowSoftmax(logits), labels);
      logits.data()[i] = x - h;
      const double down = CrossEntropy(RowSoftmax(logits), labels);
      logits.data()[i] = x;
      const double n = (up - down) / (2 * h), a = grad.data()[i];
      worst = std::max(worst, std::abs(n - a) / std::max({std::abs(n), std::abs(a), 1e-6}));
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("ASR head output", "[heads]") {
  Gen gen(5);
  ParamStore store;
  const AsrHead head(&store, "asr", 6, 4, 2);
  AsrHeadCache cache;
  const Mat logits = head.Forward(store, gen.Matrix(11, 6), &cache);
  CHECK(logits.rows() == 11);
  CHECK(logits.cols() == kVocabSize);
  CHECK(logits.allFinite());
}

}  // namespace
}  // namespace tsb
