// src/ctc.cc

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

#include "tsb/ctc.h"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "tsb/errors.h"

namespace tsb {

namespace {

constexpr Real kLogZero = -1e30;

Real LogAdd(Real a, Real b) {
  if (a <= kLogZero) return b;
  if (b <= kLogZero) return a;
  const Real m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

Mat LogSoftmaxRows(const Mat& x) {
  Mat y(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const Real m = x.row(t).maxCoeff();
    const Real lse = m + std::log((x.row(t).array() - m).exp().sum());
    y.row(t) = x.row(t).array() - lse;
  }
  return y;
}

}  // namespace

std::string NormalizeTranscript(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(ch));
  }
  return out;
}

std::vector<int> EncodeTranscript(const std::string& text) {
  std::vector<int> tokens;
  for (char ch : NormalizeTranscript(text)) {
    if (ch == ' ') tokens.push_back(1);
    else if (ch == '\'') tokens.push_back(2);
    else if (ch >= 'a' && ch <= 'z') tokens.push_back(3 + (ch - 'a'));
    else throw DataError(std::string("transcript character '") + ch + "' is not in the vocabulary");
  }
  return tokens;
}

std::string DecodeTokens(const std::vector<int>& tokens) {
  std::string out;
  for (int t : tokens) {
    if (t == 1) out += ' ';
    else if (t == 2) out += '\'';
    else if (t >= 3 && t < kVocabSize) out += static_cast<char>('a' + (t - 3));
  }
  return out;
}

int CtcMinFrames(const std::vector<int>& label) {
  int n = static_cast<int>(label.size());
  for (std::size_t i = 1; i < label.size(); ++i) n += label[i] == label[i - 1];
  return n;
}

Real CtcLoss(const Mat& logits, const std::vector<int>& label, Mat* grad) {
  const Eigen::Index frames = logits.rows(), vocab = logits.cols();
  if (frames < 1) throw DataError("ctc: no frames");
  for (int tok : label) {
    if (tok <= kBlank || tok >= vocab) throw DataError("ctc: label token out of range");
  }
  if (CtcMinFrames(label) > frames)
    throw DataError("ctc: label of " + std::to_string(label.size()) + " tokens needs " +
                    std::to_string(CtcMinFrames(label)) + " frames, got " + std::to_string(frames));

  const Mat logp = LogSoftmaxRows(logits);
  const int s_len = 2 * static_cast<int>(label.size()) + 1;
  auto sym = [&](int s) { return s % 2 == 0 ? kBlank : label[s / 2]; };
  auto can_skip = [&](int s) { return s % 2 == 1 && s >= 2 && sym(s) != sym(s - 2); };

  Mat alpha = Mat::Constant(frames, s_len, kLogZero);
  alpha(0, 0) = logp(0, kBlank);
  if (s_len > 1) alpha(0, 1) = logp(0, sym(1));
  for (Eigen::Index t = 1; t < frames; ++t) {
    for (int s = 0; s < s_len; ++s) {
      Real a = alpha(t - 1, s);
      if (s >= 1) a = LogAdd(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = LogAdd(a, alpha(t - 1, s - 2));
      alpha(t, s) = a <= kLogZero ? kLogZero : a + logp(t, sym(s));
    }
  }
  Real log_total = alpha(frames - 1, s_len - 1);
  if (s_len > 1) log_total = LogAdd(log_total, alpha(frames - 1, s_len - 2));
  if (log_total <= kLogZero) throw NumericError("ctc: label has zero probability");

  if (grad != nullptr) {
    Mat beta = Mat::Constant(frames, s_len, kLogZero);
    beta(frames - 1, s_len - 1) = logp(frames - 1, sym(s_len - 1));
    if (s_len > 1) beta(frames - 1, s_len - 2) = logp(frames - 1, sym(s_len - 2));
    for (Eigen::Index t = frames - 2; t >= 0; --t) {
      for (int s = 0; s < s_len; ++s) {
        Real b = beta(t + 1, s);
        if (s + 1 < s_len) b = LogAdd(b, beta(t + 1, s + 1));
        if (s + 2 < s_len && can_skip(s + 2)) b = LogAdd(b, beta(t + 1, s + 2));
        beta(t, s) = b <= kLogZero ? kLogZero : b + logp(t, sym(s));
      }
    }
    // alpha * beta counts the emission at (t, s) twice.
    grad->resize(frames, vocab);
    for (Eigen::Index t = 0; t < frames; ++t) {
      std::vector<Real> occ(vocab, kLogZero);
      for (int s = 0; s < s_len; ++s) {
        const Real ab = alpha(t, s) + beta(t, s);
        if (alpha(t, s) <= kLogZero || beta(t, s) <= kLogZero) continue;
        occ[sym(s)] = LogAdd(occ[sym(s)], ab - logp(t, sym(s)));
      }
      for (Eigen::Index k = 0; k < vocab; ++k) {
        const Real post = occ[k] <= kLogZero ? 0.0 : std::exp(occ[k] - log_total);
        (*grad)(t, k) = std::exp(logp(t, k)) - post;
      }
    }
  }
  return -log_total;
}

std::vector<int> CtcGreedyDecode(const Mat& logits) {
  std::vector<int> out;
  int prev = -1;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    Eigen::Index best;
    logits.row(t).maxCoeff(&best);
    const int tok = static_cast<int>(best);
    if (tok != prev && tok != kBlank) out.push_back(tok);
    prev = tok;
  }
  return out;
}

}  // namespace tsb
