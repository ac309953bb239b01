// include/tsb/mixture.h

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

#ifndef TSB_MIXTURE_H_
#define TSB_MIXTURE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsb/audio.h"
#include "tsb/seed.h"

namespace tsb {

inline constexpr std::size_t kFrameStride = 320;

enum class MixMode { kMin, kMax, kSparse };
std::string ToString(MixMode mode);
MixMode ParseMixMode(const std::string& text);

// Placement of a target utterance (a) and an interfering utterance (b) on a
// common timeline. Overlap ratio = overlapped samples / mixture length.
struct PlacementPlan {
  std::size_t len_a = 0;
  std::size_t len_b = 0;
  std::size_t offset_a = 0;
  std::size_t offset_b = 0;
  std::size_t mixture_len = 0;
  MixMode mode = MixMode::kSparse;
  double requested_ratio = 0.0;

  // Active extents clipped to the mixture.
  std::size_t EndA() const;
  std::size_t EndB() const;
  std::size_t OverlapSamples() const;
  double OverlapRatio() const;
  bool TargetActive(std::size_t sample) const;
  bool InterfererActive(std::size_t sample) const;
};

/// Places two utterances so that the overlap ratio matches `ratio`.
///
/// kSparse: a single overlap of d = ratio * (len_a + len_b) / (1 + ratio)
/// samples, the leading utterance chosen by a seeded coin flip.
/// kMin: both start at 0, mixture truncated to the shorter one (ratio 1).
/// kMax: both start at 0, mixture spans the longer one.
/// The ratio request is ignored for kMin and kMax.
///
/// Throws UsageError for ratios outside [0, 1] (or 1 in sparse mode) and
/// DataError when the overlap does not fit the shorter utterance; the
/// message carries the largest feasible ratio.
PlacementPlan PlanOverlap(std::size_t len_a, std::size_t len_b, double ratio, MixMode mode,
                          std::uint64_t seed);

enum class FrameLabel : std::uint8_t { kTss = 0, kNtss = 1, kNs = 2 };
inline constexpr int kNumFrameClasses = 3;
std::string ToString(FrameLabel label);

// Frame t is classified by the activity at sample t * stride + stride / 2,
// with precedence tss > ntss > ns. Produces ceil(mixture_len / stride) labels.
std::vector<FrameLabel> FrameLabels(const PlacementPlan& plan, std::size_t stride = kFrameStride);

// "tss:100,ntss:50" style run-length coding.
std::string EncodeLabels(const std::vector<FrameLabel>& labels);
std::vector<FrameLabel> DecodeLabels(const std::string& text);

struct MixtureSample {
  std::string id;
  AudioSignal mixture;
  AudioSignal target_ref;         // target stream placed and padded to mixture length
  AudioSignal interferer_placed;  // interferer stream placed and padded
  AudioSignal noise_placed;       // g * noise crop, empty when clean
  AudioSignal enrollment;
  std::vector<FrameLabel> labels;
  std::optional<double> snr_db;   // nullopt means clean
  PlacementPlan plan;
  std::string transcript;
  std::string speaker;
  std::string interferer_speaker;
  double noise_gain = 0.0;
  double headroom_gain = 1.0;
};

inline constexpr double kHeadroomPeak = 0.9;

/// mixture = placed target + placed interferer (+ g * noise). All streams are
/// scaled jointly when the mixture peak exceeds 0.9 so that additivity holds
/// exactly. A noise shorter than the mixture is looped from a seeded offset
/// unless `loop_noise` is false, in which case DataError is thrown.
MixtureSample Synthesize(const PlacementPlan& plan, const AudioSignal& audio_a,
                         const AudioSignal& audio_b, const AudioSignal* noise,
                         std::optional<double> snr_db, std::uint64_t seed, bool loop_noise = true);

struct UtteranceRef {
  std::filesystem::path path;
  std::string speaker;
  std::size_t length = 0;  // samples
  std::string transcript;
};

struct SpeakerCorpus {
  std::map<std::string, std::vector<UtteranceRef>> by_speaker;
  std::size_t NumUtterances() const;
};

/// Recursively indexes 16 kHz mono WAVs. The speaker is the first directory
/// below `dir`, or for files directly in `dir` the file-name prefix before the
/// first '-' or '_'. Transcripts come from a sibling `<stem>.txt` or a
/// LibriSpeech-style `*.trans.txt` listing.
SpeakerCorpus ScanCorpus(const std::filesystem::path& dir);

/// Seeded choice of another utterance of the target's speaker that lasts at
/// least `min_len_sec`. Never returns the target itself.
UtteranceRef PairEnrollment(const SpeakerCorpus& corpus, const UtteranceRef& target,
                            double min_len_sec, std::uint64_t seed);

}  // namespace tsb

#endif  // TSB_MIXTURE_H_
