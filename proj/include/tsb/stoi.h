// include/tsb/stoi.h

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

#ifndef TSB_STOI_H_
#define TSB_STOI_H_

#include <span>
#include <vector>

#include "tsb/audio.h"

namespace tsb {

/// Short-time objective intelligibility of `est` against the clean `ref`.
///
/// Both signals are resampled to 10 kHz, frames that are more than 40 dB
/// below the loudest reference frame are dropped from both, and the
/// one-third-octave band envelopes (15 bands from 150 Hz) of 384 ms segments
/// are correlated after normalization and clipping at -15 dB SDR. Negative
/// averages are clamped at 0.
///
/// Throws DataError on length mismatch, on a silent reference, and when
/// fewer than 30 frames (384 ms) remain after silent-frame removal.
double Stoi(const AudioSignal& est, const AudioSignal& ref);

/// Polyphase 16 kHz -> 10 kHz resampler (up 5, down 8) with a 320-tap
/// Kaiser-windowed sinc low-pass at 0.9 of the output Nyquist frequency.
std::vector<double> Resample16kTo10k(std::span<const double> x);

}  // namespace tsb

#endif  // TSB_STOI_H_
