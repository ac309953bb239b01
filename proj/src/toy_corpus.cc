// src/toy_corpus.cc

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

#include "tsb/toy_corpus.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "tsb/errors.h"
#include "tsb/seed.h"

namespace tsb {

namespace {

const char* const kLexicon[] = {"red",  "blue", "green", "cat",  "dog",  "sun",  "tree", "bird",
                                "fish", "star", "moon",  "rain", "snow", "wind", "fire", "stone",
                                "lake", "hill", "road",  "bell", "milk", "salt", "gold", "wolf"};
constexpr int kLexiconSize = sizeof(kLexicon) / sizeof(kLexicon[0]);

// Resonance gain of a formant at frequency f.
double Resonance(double f, double center, double bandwidth) {
  const double d = (f - center) / bandwidth;
  return 1.0 / (1.0 + d * d);
}

}  // namespace

ToyVoice MakeToyVoice(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ToyVoice v;
  v.f0 = std::uniform_real_distribution<double>(90.0, 260.0)(rng);
  v.formant_scale = std::uniform_real_distribution<double>(0.85, 1.2)(rng);
  v.gain = std::uniform_real_distribution<double>(0.3, 0.5)(rng);
  return v;
}

AudioSignal SynthesizeUtterance(const std::string& text, const ToyVoice& voice, double seconds,
                                std::uint64_t seed) {
  if (text.empty()) throw UsageError("cannot synthesize an empty transcript");
  double units = 0.0;
  for (char c : text) units += c == ' ' ? 0.5 : 1.0;
  const double unit = seconds > 0.0 ? seconds / units : 0.08;
  const auto total = static_cast<std::size_t>(std::llround(units * unit * kSampleRate));
  std::vector<double> out(total, 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 1.0);

  double phase = 0.0;
  double pos = 0.0;
  for (char c : text) {
    const double len = (c == ' ' ? 0.5 : 1.0) * unit * kSampleRate;
    const auto begin = static_cast<std::size_t>(std::llround(pos));
    const auto end = std::min(total, static_cast<std::size_t>(std::llround(pos + len)));
    pos += len;
    if (c == ' ' || !std::isalpha(static_cast<unsigned char>(c))) continue;
    const int k = std::tolower(static_cast<unsigned char>(c)) - 'a';
    const double f1 = (280.0 + 45.0 * (k % 11)) * voice.formant_scale;
    const double f2 = (850.0 + 95.0 * ((k * 7) % 17)) * voice.formant_scale;
    const double f3 = (2300.0 + 120.0 * ((k * 5) % 9)) * voice.formant_scale;
    const double pitch = voice.f0 * (1.0 + 0.04 * ((k % 5) - 2)) * (1.0 + 0.01 * jitter(rng));
    const int harmonics = static_cast<int>(7000.0 / pitch);
    std::vector<double> amp(harmonics + 1, 0.0);
    double norm = 0.0;
    for (int h = 1; h <= harmonics; ++h) {
      const double f = h * pitch;
      amp[h] = Resonance(f, f1, 90.0) + 0.7 * Resonance(f, f2, 120.0) + 0.4 * Resonance(f, f3, 200.0);
      norm += amp[h];
    }
    const std::size_t n = end > begin ? end - begin : 0;
    for (std::size_t s = 0; s < n; ++s) {
      const double t = static_cast<double>(s) / static_cast<double>(std::max<std::size_t>(n - 1, 1));
      const double env = std::sin(std::numbers::pi * t);
      phase += 2.0 * std::numbers::pi * pitch / kSampleRate;
      double v = 0.0;
      for (int h = 1; h <= harmonics; ++h) v += amp[h] * std::sin(h * phase);
      out[begin + s] = voice.gain * env * v / norm;
    }
  }
  return AudioSignal(std::move(out));
}

AudioSignal SynthesizeNoise(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> out(samples);
  double state = 0.0;
  for (auto& v : out) {
    state = 0.8 * state + 0.2 * g(rng);
    v = 0.3 * state;
  }
  return AudioSignal(std::move(out));
}

ToyCorpusResult WriteToyCorpus(const ToyCorpusConfig& c) {
  if (c.speakers < 1 || c.utterances_per_speaker < 1 || c.words_per_utterance < 1)
    throw UsageError("toy corpus needs at least one speaker, utterance and word");
  namespace fs = std::filesystem;
  ToyCorpusResult result;
  for (int s = 0; s < c.speakers; ++s) {
    char spk[16];
    std::snprintf(spk, sizeof(spk), "spk%02d", s);
    const ToyVoice voice = MakeToyVoice(DeriveSeed(c.seed, "voice/" + std::string(spk)));
    fs::create_directories(c.out_dir / spk);
    for (int u = 0; u < c.utterances_per_speaker; ++u) {
      const std::uint64_t seed = DeriveSeed(DeriveSeed(c.seed, spk), static_cast<std::uint64_t>(u));
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> pick(0, kLexiconSize - 1);
      std::string text;
      for (int w = 0; w < c.words_per_utterance; ++w) {
        if (w > 0) text += ' ';
        text += kLexicon[pick(rng)];
      }
      char stem[32];
      std::snprintf(stem, sizeof(stem), "%s-%02d", spk, u);
      const fs::path wav = c.out_dir / spk / (std::string(stem) + ".wav");
      WriteWav(wav, SynthesizeUtterance(text, voice, c.utterance_seconds, DeriveSeed(seed, 1)));
      std::ofstream(c.out_dir / spk / (std::string(stem) + ".txt")) << text << '\n';
      result.utterances.push_back(wav);
    }
  }
  if (c.noise_files > 0) {
    result.noise_dir = c.out_dir.parent_path() / (c.out_dir.filename().string() + "_noise");
    fs::create_directories(result.noise_dir);
    const auto samples = static_cast<std::size_t>(std::llround(c.noise_seconds * kSampleRate));
    for (int k = 0; k < c.noise_files; ++k) {
      char name[32];
      std::snprintf(name, sizeof(name), "noise-%02d.wav", k);
      WriteWav(result.noise_dir / name,
               SynthesizeNoise(samples, DeriveSeed(DeriveSeed(c.seed, "noise"), static_cast<std::uint64_t>(k))));
    }
  }
  return result;
}

}  // namespace tsb
