// tests/support/fixtures.h

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

#ifndef TSB_TESTS_SUPPORT_FIXTURES_H_
#define TSB_TESTS_SUPPORT_FIXTURES_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gen.h"
#include "tsb/manifest.h"
#include "tsb/model.h"

namespace tsb::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Synthetic corpus of `speakers` x `utterances` two-word clips of `seconds`.
std::filesystem::path WriteCorpus(const std::filesystem::path& root, int speakers, int utterances,
                                  double seconds, std::uint64_t seed, int noise_files = 0);

// Eight clean sparse mixtures at overlap 0.2 of 1.8 s utterances (3 s
// mixtures) with two-word transcripts.
struct OverfitSet {
  Manifest manifest;
  std::vector<Example> examples;
};
OverfitSet MakeOverfitSet(const std::filesystem::path& root, bool need_tokens, std::uint64_t seed = 11);

// Reduced model used by the training tests.
ModelConfig OverfitModelConfig();

// Model small enough for exhaustive finite differences: upstream dim 8,
// hidden 4.
ModelConfig TinyModelConfig();

// Random example of `samples` samples with labels for ceil(samples / 320)
// frames and the transcript "ab".
Example RandomExample(Gen& gen, std::size_t samples);

}  // namespace tsb::testing

#endif  // TSB_TESTS_SUPPORT_FIXTURES_H_
