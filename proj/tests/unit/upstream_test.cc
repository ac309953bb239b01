// tests/unit/upstream_test.cc

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

#include <cstring>
#include <fstream>

#include "catch_amalgamated.hpp"
#include "fixtures.h"
#include "gen.h"
#include "tsb/errors.h"
#include "tsb/upstream.h"

namespace tsb {
namespace {

namespace fs = std::filesystem;
using testing::Gen;
using testing::TempDir;

LayerStack RandomStack(Gen& gen, int layers, int frames, int dim) {
  LayerStack s;
  for (int l = 0; l < layers; ++l) s.layers.push_back(gen.Matrix(frames, dim));
  return s;
}

void WriteHeader(const fs::path& p, const char* magic, std::uint32_t version, std::uint32_t layers,
                 std::uint32_t frames, std::uint32_t dim, std::size_t payload_floats) {
  std::ofstream os(p, std::ios::binary);
  os.write(magic, 4);
  for (std::uint32_t v : {version, layers, frames, dim}) os.write(reinterpret_cast<const char*>(&v), 4);
  const float zero = 0.0f;
  for (std::size_t i = 0; i < payload_floats; ++i) os.write(reinterpret_cast<const char*>(&zero), 4);
}

TEST_CASE("Upstream output shape", "[upstream]") {
  ParamStore store;
  const ToyUpstream up(&store, UpstreamConfig{});
  Gen gen(1);
  const LayerStack s = up.Forward(store, AudioSignal(gen.Normals(16000, 0.1)));
  CHECK(s.NumLayers() == 5);
  CHECK(s.Frames() == 50);
  CHECK(s.Dim() == 64);
  CHECK(up.Forward(store, AudioSignal(gen.Normals(16001, 0.1))).Frames() == 51);
  CHECK_THROWS_AS(up.Forward(store, AudioSignal(gen.Normals(319, 0.1))), DataError);
  for (const auto& layer : s.layers) CHECK(layer.allFinite());
}

TEST_CASE("Upstream is deterministic", "[upstream]") {
  Gen gen(2);
  const AudioSignal wave(gen.Normals(5000, 0.1));
  ParamStore s1, s2;
  const ToyUpstream a(&s1, UpstreamConfig{}), b(&s2, UpstreamConfig{});
  CHECK(s1.Checksum() == s2.Checksum());
  const LayerStack x = a.Forward(s1, wave), y = b.Forward(s2, wave);
  for (int l = 0; l < x.NumLayers(); ++l) CHECK(x.layers[l] == y.layers[l]);

  UpstreamConfig other;
  other.seed = 99;
  ParamStore s3;
  ToyUpstream c(&s3, other);
  CHECK(s3.Checksum() != s1.Checksum());
}

TEST_CASE("Appending one frame of zeros adds one frame", "[upstream]") {
  ParamStore store;
  const ToyUpstream up(&store, UpstreamConfig{});
  Gen gen(3);
  std::vector<double> wave = gen.Normals(3200, 0.1);
  const LayerStack a = up.Forward(store, AudioSignal(wave));
  wave.resize(wave.size() + 320, 0.0);
  const LayerStack b = up.Forward(store, AudioSignal(wave));
  CHECK(b.Frames() == a.Frames() + 1);
  CHECK(a.layers[0] == b.layers[0].topRows(a.Frames()));
}

TEST_CASE("Upstream call counter", "[upstream]") {
  ParamStore store;
  ToyUpstream up(&store, UpstreamConfig{});
  Gen gen(4);
  const AudioSignal wave(gen.Normals(640, 0.1));
  up.Forward(store, wave);
  up.Forward(store, wave);
  CHECK(up.calls() == 2);
  up.ResetCalls();
  CHECK(up.calls() == 0);
}

TEST_CASE("Layer mixer", "[upstream]") {
  Gen gen(5);
  const LayerStack s = RandomStack(gen, 4, 6, 3);
  ParamStore store;
  const LayerMixer mixer(&store, "mix", 4);
  CHECK((mixer.Weights(store).array() - 0.25).abs().maxCoeff() < 1e-15);
  const Mat mean = (s.layers[0] + s.layers[1] + s.layers[2] + s.layers[3]) / 4.0;
  CHECK((mixer.Forward(store, s) - mean).cwiseAbs().maxCoeff() < 1e-12);

  store[mixer.logits()](0, 2) = 40.0;
  CHECK((mixer.Forward(store, s) - s.layers[2]).cwiseAbs().maxCoeff() < 1e-6);

  for (int k = 0; k < 20; ++k) {
    store[mixer.logits()] = gen.Matrix(1, 4, 5.0);
    const RowVec w = mixer.Weights(store);
    REQUIRE(std::abs(w.sum() - 1.0) < 1e-12);
    REQUIRE(w.minCoeff() >= 0.0);
  }
  CHECK_THROWS_AS(mixer.Forward(store, RandomStack(gen, 3, 6, 3)), DataError);
  CHECK(LayerWeightsFromLogits(RowVec::Zero(5)).sum() == Catch::Approx(1.0));
}

TEST_CASE("TSFB1 round trip", "[upstream]") {
  TempDir dir("tsfb");
  Gen gen(6);
  const LayerStack s = RandomStack(gen, 3, 7, 5);
  const fs::path p = dir.path() / "x.tsfb";
  WriteFeatures(p, s);
  CHECK(fs::file_size(p) == 20 + 3 * 7 * 5 * 4);
  const LayerStack r = ReadFeatures(p);
  REQUIRE(r.NumLayers() == 3);
  for (int l = 0; l < 3; ++l)
    CHECK(r.layers[l] == s.layers[l].cast<float>().cast<double>());
  const LayerStack again = ReadFeatures(p);
  CHECK(again.layers[2] == r.layers[2]);
}

TEST_CASE("TSFB1 errors name the field", "[upstream]") {
  TempDir dir("tsfb-bad");
  const fs::path p = dir.path() / "bad.tsfb";
  auto message = [&] {
    try {
      ReadFeatures(p);
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  WriteHeader(p, "TSFB", 1, 3, 4, 2, 10);
  CHECK_THAT(message(), Catch::Matchers::ContainsSubstring("payload shorter than header promises"));
  WriteHeader(p, "TSFB", 1, 3, 0, 2, 0);
  CHECK_THAT(message(), Catch::Matchers::ContainsSubstring("'frames'"));
  WriteHeader(p, "TSFB", 1, 3, 4, 0, 0);
  CHECK_THAT(message(), Catch::Matchers::ContainsSubstring("'dim'"));
  WriteHeader(p, "TSFX", 1, 3, 4, 2, 24);
  CHECK_THAT(message(), Catch::Matchers::ContainsSubstring("magic"));
  WriteHeader(p, "TSFB", 2, 3, 4, 2, 24);
  CHECK_THAT(message(), Catch::Matchers::ContainsSubstring("version"));
  WriteHeader(p, "TSFB", 1, 3, 4, 2, 25);
  CHECK_THAT(message(), Catch::Matchers::ContainsSubstring("trailing"));
  {
    std::ofstream os(p, std::ios::binary);
    os.write("TSFB", 4);
  }
  CHECK_THAT(message(), Catch::Matchers::ContainsSubstring("'version'"));
  WriteHeader(p, "TSFB", 1, 3, 4, 2, 24);
  CHECK(message() == "no error");
}

}  // namespace
}  // namespace tsb
