// tests/support/fixtures.cc

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

#include "fixtures.h"

#include <atomic>
#include <unistd.h>

#include "tsb/ctc.h"
#include "tsb/toy_corpus.h"

namespace tsb::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("tsb-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path WriteCorpus(const fs::path& root, int speakers, int utterances, double seconds,
                     std::uint64_t seed, int noise_files) {
  ToyCorpusConfig c;
  c.out_dir = root / "corpus";
  c.speakers = speakers;
  c.utterances_per_speaker = utterances;
  c.words_per_utterance = 2;
  c.utterance_seconds = seconds;
  c.noise_files = noise_files;
  c.noise_seconds = 8.0;
  c.seed = seed;
  WriteToyCorpus(c);
  return c.out_dir;
}

OverfitSet MakeOverfitSet(const fs::path& root, bool need_tokens, std::uint64_t seed) {
  SimulationConfig sim;
  sim.corpus_dir = WriteCorpus(root, 4, 4, 1.8, seed);
  sim.out_dir = root / "overfit";
  sim.n_mixtures = 8;
  sim.mode = MixMode::kSparse;
  sim.overlap_conditions = {0.2};
  sim.seed = seed;
  BuildCorpus(sim);
  OverfitSet set;
  set.manifest = ReadManifest(sim.out_dir / "manifest.jsonl");
  for (const auto& r : set.manifest.records) set.examples.push_back(MakeExample(set.manifest, r, need_tokens));
  return set;
}

ModelConfig OverfitModelConfig() {
  ModelConfig c;
  c.hidden = 32;
  c.asr_hidden = 64;
  c.embed_dim = 64;
  c.heads = 2;
  c.compress_dim = 32;
  c.seed = 5;
  return c;
}

ModelConfig TinyModelConfig() {
  ModelConfig c;
  c.upstream.layers = 2;
  c.upstream.dim = 8;
  c.upstream.frontend_channels = 4;
  c.upstream.ff_dim = 8;
  c.hidden = 4;
  c.asr_hidden = 4;
  c.embed_dim = 6;
  c.heads = 2;
  c.compress_dim = 3;
  c.seed = 3;
  return c;
}

Example RandomExample(Gen& gen, std::size_t samples) {
  Example ex;
  ex.id = "random";
  ex.mixture = AudioSignal(gen.Normals(samples, 0.3));
  ex.target = AudioSignal(gen.Normals(samples, 0.3));
  ex.enrollment = AudioSignal(gen.Normals(samples, 0.3));
  const std::size_t frames = (samples + 319) / 320;
  for (std::size_t t = 0; t < frames; ++t) ex.labels.push_back(static_cast<FrameLabel>(t % 3));
  ex.transcript = "ab";
  ex.tokens = EncodeTranscript(ex.transcript);
  ex.mixture_len = samples;
  return ex;
}

}  // namespace tsb::testing
