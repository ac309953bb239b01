// include/tsb/ctc.h

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

#ifndef TSB_CTC_H_
#define TSB_CTC_H_

#include <string>
#include <vector>

#include "tsb/tensor.h"

namespace tsb {

// Character vocabulary: blank, space, apostrophe, a-z.
inline constexpr int kBlank = 0;
inline constexpr int kVocabSize = 29;

// Lower-cases, collapses runs of whitespace and maps to token ids. Throws
// DataError for characters outside the vocabulary.
std::vector<int> EncodeTranscript(const std::string& text);
std::string DecodeTokens(const std::vector<int>& tokens);
// Normalized form of a transcript as produced by EncodeTranscript.
std::string NormalizeTranscript(const std::string& text);

// Smallest frame count that can emit `label`: one frame per token plus a blank
// between adjacent repeats.
int CtcMinFrames(const std::vector<int>& label);

// Negative log probability of `label` under per-frame softmax(logits), via the
// log-space forward recursion. If `grad` is non-null it receives d loss /
// d logits. Throws DataError when the label cannot fit in T frames.
Real CtcLoss(const Mat& logits, const std::vector<int>& label, Mat* grad = nullptr);

// Per-frame argmax, repeats collapsed, blanks removed.
std::vector<int> CtcGreedyDecode(const Mat& logits);

}  // namespace tsb

#endif  // TSB_CTC_H_
