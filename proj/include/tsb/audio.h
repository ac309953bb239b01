// include/tsb/audio.h

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

#ifndef TSB_AUDIO_H_
#define TSB_AUDIO_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tsb {

inline constexpr int kSampleRate = 16000;

/// Mono waveform with a sample-rate tag. Samples are nominally in [-1, 1].
class AudioSignal {
 public:
  AudioSignal() = default;
  explicit AudioSignal(std::vector<double> samples, int sample_rate = kSampleRate);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  int sample_rate() const { return sample_rate_; }
  double duration() const { return static_cast<double>(size()) / sample_rate_; }

  std::span<const double> samples() const { return samples_; }
  std::vector<double>& mutable_samples() { return samples_; }
  double operator[](std::size_t i) const { return samples_[i]; }

  /// Throws DataError unless the signal is nonempty, finite and has a positive rate.
  void Validate(const std::string& what) const;

 private:
  std::vector<double> samples_;
  int sample_rate_ = kSampleRate;
};

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  std::size_t num_samples = 0;
};

/// Reads the header only. Same format restrictions as ReadWav.
WavInfo ReadWavInfo(const std::filesystem::path& path);

/// Reads RIFF/WAVE 16-bit PCM mono 16 kHz; anything else is rejected with a
/// DataError naming the offending property.
AudioSignal ReadWav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono. Samples are clipped to the representable range and
/// rounded to the nearest integer code.
void WriteWav(const std::filesystem::path& path, const AudioSignal& signal);

/// The integer code WriteWav stores for a sample.
std::int16_t QuantizeSample(double x);

/// Round trip through 16-bit quantization.
AudioSignal Quantize16(const AudioSignal& signal);

}  // namespace tsb

#endif  // TSB_AUDIO_H_
