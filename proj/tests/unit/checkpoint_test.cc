// tests/unit/checkpoint_test.cc

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

#include <fstream>
#include <iterator>

#include "catch_amalgamated.hpp"
#include "fixtures.h"
#include "gen.h"
#include "tsb/checkpoint.h"
#include "tsb/errors.h"
#include "tsb/trainer.h"

namespace tsb {
namespace {

namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;
using testing::Gen;
using testing::TempDir;

std::string ErrorOf(const fs::path& p) {
  try {
    LoadCheckpoint(p);
  } catch (const DataError& e) {
    return e.what();
  }
  return "no error";
}

std::vector<char> Bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void Put(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream(p, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Sample() {
  Gen gen(1);
  Checkpoint c;
  c.meta = {{"task", "tse"}, {"step", 3}};
  c.tensors.push_back({"a", gen.Matrix(3, 4), TensorDtype::kFloat64});
  c.tensors.push_back({"b", gen.Matrix(1, 5), TensorDtype::kFloat32});
  return c;
}

TEST_CASE("Checkpoint round trip", "[checkpoint]") {
  TempDir dir("ckpt");
  const fs::path p = dir.path() / "x.ckpt";
  const Checkpoint c = Sample();
  const std::uint64_t h = SaveCheckpoint(p, c);
  const Checkpoint r = LoadCheckpoint(p);
  CHECK(r.content_hash == h);
  CHECK(r.meta == c.meta);
  REQUIRE(r.tensors.size() == 2);
  CHECK(r.Get("a").value == c.tensors[0].value);
  CHECK(r.Get("b").dtype == TensorDtype::kFloat32);
  CHECK(r.Get("b").value == c.tensors[1].value.cast<float>().cast<double>());
  CHECK(r.Find("c") == nullptr);
  CHECK_THROWS_WITH(r.Get("c"), ContainsSubstring("'c'"));
  CHECK(HexHash(h).size() == 16);

  const fs::path q = dir.path() / "y.ckpt";
  CHECK(SaveCheckpoint(q, c) == h);
  CHECK(Bytes(p) == Bytes(q));
}

TEST_CASE("Checkpoint corruption is detected", "[checkpoint]") {
  TempDir dir("ckpt-bad");
  const fs::path p = dir.path() / "x.ckpt";
  SaveCheckpoint(p, Sample());
  const auto good = Bytes(p);

  auto flipped = good;
  flipped[good.size() / 2] ^= 0x10;
  Put(p, flipped);
  CHECK_THAT(ErrorOf(p), ContainsSubstring("content hash mismatch"));

  Put(p, std::vector<char>(good.begin(), good.begin() + 40));
  CHECK(ErrorOf(p) != "no error");

  auto magic = good;
  magic[0] = 'X';
  Put(p, magic);
  CHECK_THAT(ErrorOf(p), ContainsSubstring("magic"));

  Put(p, std::vector<char>(good.begin(), good.begin() + 8));
  CHECK_THAT(ErrorOf(p), ContainsSubstring("too short"));
  CHECK_THAT(ErrorOf(dir.path() / "missing.ckpt"), ContainsSubstring("cannot open"));
}

TEST_CASE("Model parameters survive a checkpoint", "[checkpoint]") {
  TempDir dir("ckpt-model");
  TaskModel model(Task::kTsasr, testing::TinyModelConfig());
  Gen gen(2);
  for (std::size_t i = 0; i < model.store().size(); ++i) {
    Mat& m = model.store()[model.store().At(i)];
    m = gen.Matrix(m.rows(), m.cols(), 0.1);
  }
  Trainer trainer(&model, TrainConfig{.task = Task::kTsasr}, {testing::RandomExample(gen, 1600)});
  trainer.Save(dir.path() / "m.ckpt");
  const auto loaded = LoadModel(LoadCheckpoint(dir.path() / "m.ckpt"));
  CHECK(loaded->task() == Task::kTsasr);
  CHECK(loaded->store().Checksum() == model.store().Checksum());

  TaskModel other(Task::kTse, testing::OverfitModelConfig());
  CHECK_THROWS_AS(other.ImportParams(LoadCheckpoint(dir.path() / "m.ckpt")), DataError);
  CHECK_THROWS_AS(LoadModel(Checkpoint{}), DataError);
}

}  // namespace
}  // namespace tsb
