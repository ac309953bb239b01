// tests/unit/trainer_test.cc

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
#include <limits>
#include <set>

#include "catch_amalgamated.hpp"
#include "fixtures.h"
#include "gen.h"
#include "tsb/errors.h"
#include "tsb/trainer.h"

namespace tsb {
namespace {

using testing::Gen;
using testing::RandomExample;
using testing::TinyModelConfig;

std::vector<Example> Data(std::uint64_t seed, int n = 4) {
  Gen gen(seed);
  std::vector<Example> out;
  for (int k = 0; k < n; ++k) {
    out.push_back(RandomExample(gen, static_cast<std::size_t>(gen.Int(1280, 2400))));
    out.back().id = "ex" + std::to_string(k);
  }
  return out;
}

TrainConfig Config(Task task, int steps) {
  TrainConfig c;
  c.task = task;
  c.steps = steps;
  c.batch = 3;
  c.warmup = 2;
  c.seed = 4;
  c.deterministic = true;
  return c;
}

TEST_CASE("Multitask loss", "[trainer]") {
  CHECK(MultitaskLoss(2.0, 4.0, 1.0) == 2.0);
  CHECK(MultitaskLoss(2.0, 4.0, 0.0) == 4.0);
  CHECK(MultitaskLoss(2.0, 4.0, 0.5) == 3.0);
  CHECK_THROWS_AS(MultitaskLoss(2.0, 4.0, 1.5), UsageError);
}

TEST_CASE("Zero learning rate leaves parameters unchanged", "[trainer]") {
  TaskModel model(Task::kTseTsasr, TinyModelConfig());
  const auto before = model.store().Checksum();
  TrainConfig c = Config(Task::kTseTsasr, 4);
  c.lr = 0.0;
  c.freeze_upstream = false;
  Trainer trainer(&model, c, Data(1));
  for (const auto& r : trainer.Run()) CHECK(std::isfinite(r.total));
  CHECK(model.store().Checksum() == before);
}

TEST_CASE("Frozen and fine-tuned upstream", "[trainer]") {
  TaskModel frozen(Task::kTse, TinyModelConfig());
  const auto up = frozen.store().Checksum("upstream."), rest = frozen.store().Checksum("encoder.");
  Trainer a(&frozen, Config(Task::kTse, 5), Data(2));
  a.Run();
  CHECK(frozen.store().Checksum("upstream.") == up);
  CHECK(frozen.store().Checksum("encoder.") != rest);

  TaskModel tuned(Task::kTse, TinyModelConfig());
  TrainConfig c = Config(Task::kTse, 1);
  c.freeze_upstream = false;
  Trainer b(&tuned, c, Data(2));
  b.Run();
  CHECK(tuned.store().Checksum("upstream.") != up);
}

TEST_CASE("Resume matches an uninterrupted run", "[trainer]") {
  testing::TempDir dir("resume");
  TaskModel full(Task::kPsePvad, TinyModelConfig());
  Trainer a(&full, Config(Task::kPsePvad, 6), Data(3));
  const auto log = a.Run();

  TaskModel first(Task::kPsePvad, TinyModelConfig());
  Trainer b(&first, Config(Task::kPsePvad, 3), Data(3));
  b.Run();
  b.Save(dir.path() / "half.ckpt");

  TaskModel second(Task::kPsePvad, TinyModelConfig());
  Trainer c(&second, Config(Task::kPsePvad, 6), Data(3));
  c.Restore(LoadCheckpoint(dir.path() / "half.ckpt"));
  CHECK(c.step() == 3);
  const auto tail = c.Run();
  REQUIRE(tail.size() == 3);
  CHECK(tail.back().total == log.back().total);
  CHECK(second.store().Checksum() == full.store().Checksum());
  CHECK(c.running_loss() == a.running_loss());
}

TEST_CASE("Deterministic mode does not depend on threads", "[trainer]") {
  TaskModel one(Task::kTse, TinyModelConfig()), three(Task::kTse, TinyModelConfig());
  TrainConfig c = Config(Task::kTse, 3);
  c.batch = 4;
  Trainer a(&one, c, Data(4));
  c.threads = 3;
  Trainer b(&three, c, Data(4));
  a.Run();
  b.Run();
  CHECK(one.store().Checksum() == three.store().Checksum());
}

TEST_CASE("Alpha one joint run follows the single-task run", "[trainer]") {
  TaskModel single(Task::kTse, TinyModelConfig()), joint(Task::kTseTsasr, TinyModelConfig());
  TrainConfig c = Config(Task::kTse, 4);
  Trainer a(&single, c, Data(5));
  c.task = Task::kTseTsasr;
  c.alpha = 1.0;
  Trainer b(&joint, c, Data(5));
  const auto la = a.Run(), lb = b.Run();
  for (std::size_t k = 0; k < la.size(); ++k) CHECK(la[k].total == lb[k].total);
  for (const char* prefix : {"upstream.", "encoder.", "head.tse."})
    CHECK(single.store().Checksum(prefix) == joint.store().Checksum(prefix));
}

TEST_CASE("Layer weights stay on the simplex", "[trainer]") {
  TaskModel model(Task::kPvad, TinyModelConfig());
  TrainConfig c = Config(Task::kPvad, 8);
  c.lr = 0.05;
  Trainer t(&model, c, Data(6));
  t.Run();
  for (const LayerMixer* m : {&model.encoder().extractor_mixer(), &model.encoder().mhfa().key_mixer(),
                              &model.encoder().mhfa().value_mixer()}) {
    const RowVec w = m->Weights(model.store());
    CHECK(std::abs(w.sum() - 1.0) < 1e-6);
    CHECK(w.minCoeff() >= 0.0);
  }
}

TEST_CASE("Batches and learning rate schedule", "[trainer]") {
  TaskModel model(Task::kTse, TinyModelConfig());
  TrainConfig c = Config(Task::kTse, 10);
  c.batch = 2;
  c.warmup = 4;
  Trainer t(&model, c, Data(7, 6));
  std::multiset<std::size_t> epoch;
  for (int s = 0; s < 3; ++s) {
    CHECK(t.BatchIndices(s) == t.BatchIndices(s));
    for (std::size_t i : t.BatchIndices(s)) epoch.insert(i);
  }
  CHECK(epoch == std::multiset<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK(t.LearningRate(0) == Catch::Approx(0.25e-3));
  CHECK(t.LearningRate(3) == Catch::Approx(1e-3));
  CHECK(t.LearningRate(9) == Catch::Approx(1e-3));

  c.schedule = "cosine";
  Trainer cosine(&model, c, Data(7, 6));
  CHECK(cosine.LearningRate(3) == Catch::Approx(1e-3));
  CHECK(cosine.LearningRate(7) == Catch::Approx(0.5e-3));
  CHECK(cosine.LearningRate(10) == Catch::Approx(0.0).margin(1e-15));
  c.schedule = "step";
  CHECK_THROWS_AS(Trainer(&model, c, Data(7, 6)), UsageError);
}

TEST_CASE("Trainer configuration", "[trainer]") {
  const TrainConfig c = TrainConfigFromJson({{"task", "pvad"}, {"lr", 0.01}, {"schedule", "cosine"}});
  CHECK(c.task == Task::kPvad);
  CHECK(c.lr == 0.01);
  CHECK(TrainConfigFromJson(ToJson(c)).schedule == "cosine");
  CHECK_THROWS_AS(TrainConfigFromJson({{"learning_rate", 0.1}}), UsageError);
  CHECK_THROWS_AS(TrainConfigFromJson({{"lr", "fast"}}), UsageError);

  TaskModel model(Task::kTse, TinyModelConfig());
  CHECK_THROWS_AS(Trainer(&model, Config(Task::kPvad, 1), Data(8)), UsageError);
  CHECK_THROWS_AS(Trainer(&model, Config(Task::kTse, 1), {}), DataError);
}

TEST_CASE("Non-finite loss names the example", "[trainer]") {
  TaskModel model(Task::kTse, TinyModelConfig());
  auto data = Data(9, 1);
  data[0].target.mutable_samples()[5] = std::numeric_limits<double>::quiet_NaN();
  data[0].id = "broken";
  TrainConfig c = Config(Task::kTse, 1);
  c.batch = 1;
  Trainer t(&model, c, data);
  CHECK_THROWS_WITH(t.Step(), Catch::Matchers::ContainsSubstring("broken"));
}

}  // namespace
}  // namespace tsb
