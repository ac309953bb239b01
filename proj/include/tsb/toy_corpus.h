// include/tsb/toy_corpus.h

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

#ifndef TSB_TOY_CORPUS_H_
#define TSB_TOY_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsb/audio.h"

namespace tsb {

// Voice of a synthetic speaker.
struct ToyVoice {
  double f0 = 120.0;           // Hz
  double formant_scale = 1.0;  // vocal-tract length proxy
  double gain = 0.4;
};

ToyVoice MakeToyVoice(std::uint64_t seed);

// Renders a transcript as a sequence of voiced segments, one per letter, with
// letter-specific formants and short pauses for spaces. `seconds` > 0 fixes
// the total duration; otherwise each letter lasts 80 ms.
AudioSignal SynthesizeUtterance(const std::string& text, const ToyVoice& voice, double seconds,
                                std::uint64_t seed);

// Low-pass filtered Gaussian noise.
AudioSignal SynthesizeNoise(std::size_t samples, std::uint64_t seed);

struct ToyCorpusConfig {
  std::filesystem::path out_dir;
  int speakers = 4;
  int utterances_per_speaker = 4;
  int words_per_utterance = 2;
  double utterance_seconds = 0.0;
  int noise_files = 0;  // written to out_dir/../<out_dir name>_noise when > 0
  double noise_seconds = 4.0;
  std::uint64_t seed = 0;
};

struct ToyCorpusResult {
  std::vector<std::filesystem::path> utterances;
  std::filesystem::path noise_dir;
};

// Writes <out>/<speaker>/<speaker>-<k>.wav with a <stem>.txt transcript next
// to each file. Output depends only on the config.
ToyCorpusResult WriteToyCorpus(const ToyCorpusConfig& config);

}  // namespace tsb

#endif  // TSB_TOY_CORPUS_H_
