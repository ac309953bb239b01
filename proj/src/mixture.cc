// src/mixture.cc

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

#include "tsb/mixture.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "tsb/errors.h"
#include "tsb/signal_metrics.h"

namespace tsb {

namespace fs = std::filesystem;

std::string ToString(MixMode mode) {
  switch (mode) {
    case MixMode::kMin: return "min";
    case MixMode::kMax: return "max";
    case MixMode::kSparse: return "sparse";
  }
  return "sparse";
}

MixMode ParseMixMode(const std::string& text) {
  if (text == "min") return MixMode::kMin;
  if (text == "max") return MixMode::kMax;
  if (text == "sparse") return MixMode::kSparse;
  throw UsageError("unknown mixing mode '" + text + "' (expected min, max or sparse)");
}

std::string ToString(FrameLabel label) {
  switch (label) {
    case FrameLabel::kTss: return "tss";
    case FrameLabel::kNtss: return "ntss";
    case FrameLabel::kNs: return "ns";
  }
  return "ns";
}

std::size_t PlacementPlan::EndA() const { return std::min(offset_a + len_a, mixture_len); }
std::size_t PlacementPlan::EndB() const { return std::min(offset_b + len_b, mixture_len); }

std::size_t PlacementPlan::OverlapSamples() const {
  std::size_t lo = std::max(offset_a, offset_b);
  std::size_t hi = std::min(EndA(), EndB());
  return hi > lo ? hi - lo : 0;
}

double PlacementPlan::OverlapRatio() const {
  if (mixture_len == 0) return 0.0;
  return static_cast<double>(OverlapSamples()) / static_cast<double>(mixture_len);
}

bool PlacementPlan::TargetActive(std::size_t sample) const {
  return sample >= offset_a && sample < EndA();
}

bool PlacementPlan::InterfererActive(std::size_t sample) const {
  return sample >= offset_b && sample < EndB();
}

PlacementPlan PlanOverlap(std::size_t len_a, std::size_t len_b, double ratio, MixMode mode,
                          std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw UsageError("overlap ratio must lie in [0, 1], got " + std::to_string(ratio));
  if (len_a == 0 || len_b == 0) throw DataError("plan_overlap: empty utterance");

  PlacementPlan plan;
  plan.len_a = len_a;
  plan.len_b = len_b;
  plan.mode = mode;
  plan.requested_ratio = ratio;

  switch (mode) {
    case MixMode::kMin:
      plan.mixture_len = std::min(len_a, len_b);
      plan.requested_ratio = 1.0;
      return plan;
    case MixMode::kMax:
      plan.mixture_len = std::max(len_a, len_b);
      plan.requested_ratio = plan.OverlapRatio();
      return plan;
    case MixMode::kSparse:
      break;
  }

  if (ratio >= 1.0) throw UsageError("sparse mixing requires an overlap ratio below 1");
  const double total = static_cast<double>(len_a + len_b);
  const auto shorter = static_cast<double>(std::min(len_a, len_b));
  const double overlap = ratio * total / (1.0 + ratio);
  if (overlap > shorter) {
    double max_ratio = shorter / (total - shorter);
    std::ostringstream msg;
    msg << "overlap ratio " << ratio << " infeasible for utterances of " << len_a << " and "
        << len_b << " samples; maximum feasible ratio is " << max_ratio;
    throw DataError(msg.str());
  }
  const auto d = static_cast<std::size_t>(std::llround(overlap));
  std::mt19937_64 rng(seed);
  const bool a_leads = std::bernoulli_distribution(0.5)(rng);
  plan.mixture_len = len_a + len_b - d;
  if (a_leads) {
    plan.offset_a = 0;
    plan.offset_b = len_a - d;
  } else {
    plan.offset_b = 0;
    plan.offset_a = len_b - d;
  }
  return plan;
}

std::vector<FrameLabel> FrameLabels(const PlacementPlan& plan, std::size_t stride) {
  const std::size_t frames = (plan.mixture_len + stride - 1) / stride;
  std::vector<FrameLabel> labels(frames, FrameLabel::kNs);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t center = t * stride + stride / 2;
    if (plan.TargetActive(center)) {
      labels[t] = FrameLabel::kTss;
    } else if (plan.InterfererActive(center)) {
      labels[t] = FrameLabel::kNtss;
    }
  }
  return labels;
}

std::string EncodeLabels(const std::vector<FrameLabel>& labels) {
  std::string out;
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    if (!out.empty()) out += ',';
    out += ToString(labels[i]) + ":" + std::to_string(j - i);
    i = j;
  }
  return out;
}

std::vector<FrameLabel> DecodeLabels(const std::string& text) {
  std::vector<FrameLabel> labels;
  std::stringstream ss(text);
  std::string run;
  while (std::getline(ss, run, ',')) {
    auto colon = run.find(':');
    if (colon == std::string::npos) throw DataError("bad label run '" + run + "'");
    std::string name = run.substr(0, colon);
    FrameLabel label;
    if (name == "tss") label = FrameLabel::kTss;
    else if (name == "ntss") label = FrameLabel::kNtss;
    else if (name == "ns") label = FrameLabel::kNs;
    else throw DataError("unknown frame label '" + name + "'");
    std::size_t count = 0;
    try {
      count = std::stoul(run.substr(colon + 1));
    } catch (const std::exception&) {
      throw DataError("bad label count in '" + run + "'");
    }
    labels.insert(labels.end(), count, label);
  }
  return labels;
}

MixtureSample Synthesize(const PlacementPlan& plan, const AudioSignal& audio_a,
                         const AudioSignal& audio_b, const AudioSignal* noise,
                         std::optional<double> snr_db, std::uint64_t seed, bool loop_noise) {
  if (audio_a.size() != plan.len_a || audio_b.size() != plan.len_b)
    throw DataError("synthesize: plan lengths do not match the audio");

  const std::size_t n = plan.mixture_len;
  std::vector<double> x(n, 0.0), interf(n, 0.0);
  for (std::size_t s = plan.offset_a; s < plan.EndA(); ++s) x[s] = audio_a[s - plan.offset_a];
  for (std::size_t s = plan.offset_b; s < plan.EndB(); ++s) interf[s] = audio_b[s - plan.offset_b];

  std::vector<double> speech(n);
  for (std::size_t s = 0; s < n; ++s) speech[s] = x[s] + interf[s];

  MixtureSample out;
  out.plan = plan;
  out.snr_db = snr_db;
  std::vector<double> y = speech;
  std::vector<double> noise_part;
  if (noise != nullptr && snr_db) {
    if (noise->empty()) throw DataError("synthesize: empty noise signal");
    AudioSignal source = *noise;
    if (noise->size() < n) {
      if (!loop_noise)
        throw DataError("synthesize: noise shorter than mixture and looping disabled");
      std::mt19937_64 rng(DeriveSeed(seed, std::uint64_t{0}));
      std::size_t start = std::uniform_int_distribution<std::size_t>(0, noise->size() - 1)(rng);
      std::vector<double> looped(n);
      for (std::size_t k = 0; k < n; ++k) looped[k] = (*noise)[(start + k) % noise->size()];
      source = AudioSignal(std::move(looped));
    }
    NoisyMixture mixed = MixAtSnr(AudioSignal(speech), source, snr_db, DeriveSeed(seed, 1));
    out.noise_gain = mixed.noise_gain;
    noise_part.resize(n);
    for (std::size_t s = 0; s < n; ++s)
      noise_part[s] = mixed.noise_gain * source[mixed.noise_offset + s];
    y = std::move(mixed.mixture.mutable_samples());
  } else {
    out.snr_db.reset();
  }

  double peak = 0.0;
  for (double v : y) peak = std::max(peak, std::abs(v));
  if (peak > kHeadroomPeak) {
    const double k = kHeadroomPeak / peak;
    out.headroom_gain = k;
    for (auto* stream : {&x, &interf, &y, &noise_part}) {
      for (double& v : *stream) v *= k;
    }
  }

  out.mixture = AudioSignal(std::move(y));
  out.target_ref = AudioSignal(std::move(x));
  out.interferer_placed = AudioSignal(std::move(interf));
  out.noise_placed = AudioSignal(std::move(noise_part));
  out.labels = FrameLabels(plan);
  return out;
}

std::size_t SpeakerCorpus::NumUtterances() const {
  std::size_t n = 0;
  for (const auto& [spk, utts] : by_speaker) n += utts.size();
  return n;
}

namespace {

std::string LowerExtension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::string Trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string FindTranscript(const fs::path& wav) {
  fs::path sidecar = wav;
  sidecar.replace_extension(".txt");
  if (fs::exists(sidecar)) {
    std::ifstream is(sidecar);
    std::stringstream ss;
    ss << is.rdbuf();
    return Trim(ss.str());
  }
  const std::string stem = wav.stem().string();
  for (const auto& entry : fs::directory_iterator(wav.parent_path())) {
    const std::string name = entry.path().filename().string();
    if (name.size() < 10 || name.substr(name.size() - 10) != ".trans.txt") continue;
    std::ifstream is(entry.path());
    std::string line;
    while (std::getline(is, line)) {
      auto space = line.find(' ');
      if (space != std::string::npos && line.substr(0, space) == stem)
        return Trim(line.substr(space + 1));
    }
  }
  return "";
}

}  // namespace

SpeakerCorpus ScanCorpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("corpus directory not readable: " + dir.string());
  std::vector<fs::path> wavs;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && LowerExtension(entry.path()) == ".wav") wavs.push_back(entry.path());
  }
  std::sort(wavs.begin(), wavs.end());

  SpeakerCorpus corpus;
  for (const auto& wav : wavs) {
    fs::path rel = fs::relative(wav, dir);
    std::string speaker;
    if (std::distance(rel.begin(), rel.end()) >= 2) {
      speaker = rel.begin()->string();
    } else {
      std::string stem = wav.stem().string();
      speaker = stem.substr(0, stem.find_first_of("-_"));
    }
    UtteranceRef ref;
    ref.path = wav;
    ref.speaker = speaker;
    ref.length = ReadWavInfo(wav).num_samples;
    ref.transcript = FindTranscript(wav);
    corpus.by_speaker[speaker].push_back(std::move(ref));
  }
  return corpus;
}

UtteranceRef PairEnrollment(const SpeakerCorpus& corpus, const UtteranceRef& target,
                            double min_len_sec, std::uint64_t seed) {
  auto it = corpus.by_speaker.find(target.speaker);
  std::vector<const UtteranceRef*> candidates;
  if (it != corpus.by_speaker.end()) {
    const auto min_len = static_cast<std::size_t>(std::ceil(min_len_sec * kSampleRate));
    for (const auto& u : it->second) {
      if (u.path != target.path && u.length >= min_len) candidates.push_back(&u);
    }
  }
  if (candidates.empty())
    throw DataError("no eligible enrollment utterance for speaker " + target.speaker);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return *candidates[pick(rng)];
}

}  // namespace tsb
