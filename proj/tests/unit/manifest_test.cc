// tests/unit/manifest_test.cc

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
#include <set>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "fixtures.h"
#include "tsb/errors.h"
#include "tsb/manifest.h"

namespace tsb {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;
using testing::WriteCorpus;

std::string Slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

SimulationConfig SmallConfig(const fs::path& root, const std::string& out) {
  SimulationConfig c;
  c.corpus_dir = root / "corpus";
  c.out_dir = root / out;
  c.n_mixtures = 4;
  c.overlap_conditions = {0.4};
  c.seed = 21;
  return c;
}

TEST_CASE("Corpus round trip", "[manifest]") {
  TempDir dir("manifest");
  WriteCorpus(dir.path(), 2, 3, 1.0, 5);
  const auto records = BuildCorpus(SmallConfig(dir.path(), "sim"));
  const Manifest m = ReadManifest(dir.path() / "sim" / "manifest.jsonl");
  REQUIRE(m.records.size() == 4);
  CHECK(m.records == records);
  std::set<std::string> ids;
  for (const auto& r : m.records) {
    ids.insert(r.id);
    CHECK(r.speaker != r.interferer_speaker);
    CHECK(r.enrollment != r.source_target);
    CHECK_FALSE(r.snr_db.has_value());
    CHECK(std::abs(r.overlap_ratio - 0.4) <= 320.0 / static_cast<double>(r.mixture_len));
    CHECK(r.labels.size() == (r.mixture_len + 319) / 320);
    CHECK(r.transcript.has_value());
  }
  CHECK(ids.size() == 4);
}

TEST_CASE("Corpus generation is deterministic", "[manifest]") {
  TempDir dir("manifest-det");
  WriteCorpus(dir.path(), 3, 3, 1.0, 6, 1);
  SimulationConfig a = SmallConfig(dir.path(), "a");
  a.noise_dir = dir.path() / "corpus_noise";
  a.overlap_conditions.clear();
  SimulationConfig b = a;
  b.out_dir = dir.path() / "b";
  b.threads = 3;
  BuildCorpus(a);
  BuildCorpus(b);
  CHECK(Slurp(a.out_dir / "manifest.jsonl") == Slurp(b.out_dir / "manifest.jsonl"));
  const Manifest m = ReadManifest(a.out_dir / "manifest.jsonl");
  for (const auto& r : m.records) {
    CHECK(Slurp(m.Resolve(r.mixture)) == Slurp(b.out_dir / fs::relative(m.Resolve(r.mixture), a.out_dir)));
    REQUIRE(r.snr_db.has_value());
    CHECK(*r.snr_db >= 0.0);
    CHECK(*r.snr_db <= 15.0);
    CHECK(r.overlap_ratio <= 0.4 + 320.0 / static_cast<double>(r.mixture_len));
  }
}

TEST_CASE("Resynthesis reproduces the stored audio", "[manifest]") {
  TempDir dir("manifest-resynth");
  WriteCorpus(dir.path(), 2, 3, 1.0, 7, 1);
  SimulationConfig c = SmallConfig(dir.path(), "sim");
  c.noise_dir = dir.path() / "corpus_noise";
  BuildCorpus(c);
  const Manifest m = ReadManifest(c.out_dir / "manifest.jsonl");
  for (const auto& r : m.records) {
    const MixtureSample s = Resynthesize(m, r);
    const AudioSignal y = ReadWav(m.Resolve(r.mixture));
    REQUIRE(s.mixture.size() == y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      REQUIRE(QuantizeSample(s.mixture[i]) == QuantizeSample(y[i]));
      REQUIRE(std::abs(s.mixture[i] - s.target_ref[i] - s.interferer_placed[i] - s.noise_placed[i]) <= 1e-9);
    }
  }
  ManifestRecord bare = m.records[0];
  bare.source_target.clear();
  CHECK_THROWS_AS(Resynthesize(m, bare), DataError);
}

TEST_CASE("Manifest validation", "[manifest]") {
  TempDir dir("manifest-bad");
  WriteCorpus(dir.path(), 2, 2, 1.0, 8);
  BuildCorpus(SmallConfig(dir.path(), "sim"));
  const fs::path path = dir.path() / "sim" / "manifest.jsonl";
  const std::string text = Slurp(path);
  const std::string first = text.substr(0, text.find('\n') + 1);

  auto write = [&](const std::string& body) {
    const fs::path p = dir.path() / "sim" / "edited.jsonl";
    std::ofstream(p) << body;
    return p;
  };
  CHECK_THROWS_AS(ReadManifest(write(text + first)), DataError);
  fs::remove(ReadManifest(path).Resolve(ReadManifest(path).records[0].mixture));
  CHECK_THROWS_AS(ReadManifest(path), DataError);
  CHECK_NOTHROW(ReadManifest(path, false));
  std::string bad_mode = first;
  bad_mode.replace(bad_mode.find("\"sparse\""), 8, "\"dense\"");
  CHECK_THROWS(ReadManifest(write(bad_mode), false));
  CHECK_THROWS_AS(ReadManifest(dir.path() / "nope.jsonl"), DataError);
}

TEST_CASE("Corpus generation needs two speakers", "[manifest]") {
  TempDir dir("manifest-one");
  WriteCorpus(dir.path(), 1, 4, 1.0, 9);
  CHECK_THROWS_AS(BuildCorpus(SmallConfig(dir.path(), "sim")), DataError);
  SimulationConfig c = SmallConfig(dir.path(), "sim");
  c.n_mixtures = 0;
  CHECK_THROWS_AS(BuildCorpus(c), UsageError);
}

}  // namespace
}  // namespace tsb
