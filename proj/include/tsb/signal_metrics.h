// include/tsb/signal_metrics.h

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

#ifndef TSB_SIGNAL_METRICS_H_
#define TSB_SIGNAL_METRICS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsb/audio.h"

namespace tsb {

enum class MetricName { kSiSdr, kSiSdri, kStoi, kFr, kMap, kMTss, kWer };

bool HigherIsBetter(MetricName name);
std::string ToString(MetricName name);
MetricName ParseMetricName(const std::string& text);

struct MetricValue {
  MetricName name;
  double value = 0.0;
  bool higher_is_better() const { return HigherIsBetter(name); }
};

inline constexpr double kSiSdrEpsilon = 1e-8;
inline constexpr double kSiSdrClampDb = 80.0;

// Scale-invariant SDR in dB. Both signals are mean-removed, the estimate is
// projected onto the reference and the projected power is compared with the
// residual power. The result is clamped to [-80, 80] dB.
double SiSdr(std::span<const double> est, std::span<const double> ref);
double SiSdr(const AudioSignal& est, const AudioSignal& ref);

// SiSdr(est, ref) - SiSdr(mix, ref).
double SiSdrImprovement(const AudioSignal& est, const AudioSignal& mix, const AudioSignal& ref);

// Training objective: -SiSdr(est, ref). When `grad` is non-null it receives
// d loss / d est (all zeros while the clamp is active).
double NegSiSnrLoss(std::span<const double> est, std::span<const double> ref,
                    std::vector<double>* grad = nullptr);

// Percentage of values strictly below 1 dB.
double FailureRate(std::span<const double> si_sdri_values);

inline constexpr double kFailureThresholdDb = 1.0;

struct NoisyMixture {
  AudioSignal mixture;
  double noise_gain = 0.0;       // g in signal + g * noise_crop
  std::size_t noise_offset = 0;  // first noise sample used
};

// Adds a seeded crop of `noise` scaled so that the power ratio between
// `signal` and the scaled crop equals `snr_db`. A missing snr means clean:
// the signal is returned untouched with gain 0.
NoisyMixture MixAtSnr(const AudioSignal& signal, const AudioSignal& noise,
                      std::optional<double> snr_db, std::uint64_t seed);

double MeanPower(std::span<const double> x);

}  // namespace tsb

#endif  // TSB_SIGNAL_METRICS_H_
