// src/stoi.cc

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

#include "tsb/stoi.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "tsb/errors.h"

namespace tsb {

namespace {

constexpr int kStoiRate = 10000;
constexpr int kFrameLen = 256;
constexpr int kHop = 128;
constexpr int kFftSize = 512;
constexpr int kNumBands = 15;
constexpr double kMinFreq = 150.0;
constexpr int kSegmentFrames = 30;
constexpr double kBetaDb = -15.0;
constexpr double kDynRangeDb = 40.0;
constexpr double kEps = 2.220446049250313e-16;

constexpr int kUp = 5;
constexpr int kDown = 8;
constexpr int kTapsPerPhase = 64;
constexpr int kTaps = kUp * kTapsPerPhase;

const std::vector<double>& ResampleFilter() {
  static const std::vector<double> taps = [] {
    // Cutoff at 0.9 * 5 kHz, expressed in cycles per sample at 80 kHz.
    const double fc = 0.9 * (kStoiRate / 2.0) / (kSampleRate * kUp);
    const double beta = 8.0;
    const double center = (kTaps - 1) / 2.0;
    const double i0_beta = std::cyl_bessel_i(0.0, beta);
    std::vector<double> h(kTaps);
    double sum = 0.0;
    for (int k = 0; k < kTaps; ++k) {
      double t = k - center;
      double x = 2.0 * fc * t;
      double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      double r = t / center;
      double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
      h[k] = 2.0 * fc * sinc * window;
      sum += h[k];
    }
    for (double& v : h) v *= kUp / sum;
    return h;
  }();
  return taps;
}

// Periodic-free Hann as used by the reference procedure: hanning(n + 2)[1:-1].
std::vector<double> HannWindow(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 1) / (n + 1));
  return w;
}

void RemoveSilentFrames(std::vector<double>* x, std::vector<double>* y) {
  const auto w = HannWindow(kFrameLen);
  const int n = static_cast<int>(x->size());
  std::vector<int> starts;
  for (int i = 0; i < n - kFrameLen; i += kHop) starts.push_back(i);
  if (starts.empty()) throw DataError("stoi: input shorter than one analysis frame");

  std::vector<double> energy(starts.size());
  double peak = 0.0;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    double acc = 0.0;
    for (int j = 0; j < kFrameLen; ++j) {
      double v = w[j] * (*x)[starts[f] + j];
      acc += v * v;
    }
    peak = std::max(peak, acc);
    energy[f] = 20.0 * std::log10(std::sqrt(acc) + kEps);
  }
  if (peak == 0.0) throw DataError("stoi: reference is silent");
  const double max_energy = *std::max_element(energy.begin(), energy.end());

  std::vector<int> kept;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    if (max_energy - kDynRangeDb - energy[f] < 0) kept.push_back(starts[f]);
  }

  const std::size_t out_len = (kept.size() - 1) * kHop + kFrameLen;
  std::vector<double> xs(out_len, 0.0), ys(out_len, 0.0);
  for (std::size_t f = 0; f < kept.size(); ++f) {
    for (int j = 0; j < kFrameLen; ++j) {
      xs[f * kHop + j] += w[j] * (*x)[kept[f] + j];
      ys[f * kHop + j] += w[j] * (*y)[kept[f] + j];
    }
  }
  *x = std::move(xs);
  *y = std::move(ys);
}

// Rows: one-third-octave bands, cols: frames.
Eigen::MatrixXd BandEnvelopes(const std::vector<double>& x, const Eigen::MatrixXd& bands) {
  const auto w = HannWindow(kFrameLen);
  const int n = static_cast<int>(x.size());
  std::vector<int> starts;
  for (int i = 0; i < n - kFrameLen; i += kHop) starts.push_back(i);

  Eigen::FFT<double> fft;
  const int bins = kFftSize / 2 + 1;
  Eigen::MatrixXd power(bins, static_cast<Eigen::Index>(starts.size()));
  std::vector<double> frame(kFftSize);
  std::vector<std::complex<double>> spec;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (int j = 0; j < kFrameLen; ++j) frame[j] = w[j] * x[starts[f] + j];
    fft.fwd(spec, frame);
    for (int b = 0; b < bins; ++b) power(b, static_cast<Eigen::Index>(f)) = std::norm(spec[b]);
  }
  return (bands * power).cwiseSqrt();
}

Eigen::MatrixXd ThirdOctaveBands() {
  const int bins = kFftSize / 2 + 1;
  std::vector<double> freqs(bins);
  for (int b = 0; b < bins; ++b) freqs[b] = static_cast<double>(b) * kStoiRate / kFftSize;
  auto nearest = [&](double f) {
    int best = 0;
    for (int b = 1; b < bins; ++b) {
      if ((freqs[b] - f) * (freqs[b] - f) < (freqs[best] - f) * (freqs[best] - f)) best = b;
    }
    return best;
  };
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(kNumBands, bins);
  for (int k = 0; k < kNumBands; ++k) {
    double lo = kMinFreq * std::pow(2.0, (2.0 * k - 1.0) / 6.0);
    double hi = kMinFreq * std::pow(2.0, (2.0 * k + 1.0) / 6.0);
    for (int b = nearest(lo); b < nearest(hi); ++b) m(k, b) = 1.0;
  }
  return m;
}

}  // namespace

std::vector<double> Resample16kTo10k(std::span<const double> x) {
  const auto& h = ResampleFilter();
  const long n_in = static_cast<long>(x.size());
  const long n_out = (n_in * kUp + kDown - 1) / kDown;
  const long delay = kTaps / 2;
  std::vector<double> y(static_cast<std::size_t>(n_out), 0.0);
  for (long n = 0; n < n_out; ++n) {
    const long pos = n * kDown + delay;  // index in the zero-stuffed signal
    double acc = 0.0;
    for (long k = pos % kUp; k < kTaps; k += kUp) {
      long m = (pos - k) / kUp;
      if (m < 0) break;
      if (m < n_in) acc += h[k] * x[m];
    }
    y[n] = acc;
  }
  return y;
}

double Stoi(const AudioSignal& est, const AudioSignal& ref) {
  if (est.size() != ref.size())
    throw DataError("stoi: length mismatch (" + std::to_string(est.size()) + " vs " +
                    std::to_string(ref.size()) + ")");
  if (est.sample_rate() != kSampleRate || ref.sample_rate() != kSampleRate)
    throw DataError("stoi: expected 16 kHz input");

  std::vector<double> x = Resample16kTo10k(ref.samples());
  std::vector<double> y = Resample16kTo10k(est.samples());
  RemoveSilentFrames(&x, &y);

  static const Eigen::MatrixXd bands = ThirdOctaveBands();
  Eigen::MatrixXd x_tob = BandEnvelopes(x, bands);
  Eigen::MatrixXd y_tob = BandEnvelopes(y, bands);
  const Eigen::Index frames = x_tob.cols();
  if (frames < kSegmentFrames)
    throw DataError("stoi: only " + std::to_string(frames) +
                    " frames after silence removal; need at least 30 (384 ms)");

  const double clip = std::pow(10.0, -kBetaDb / 20.0);
  double total = 0.0;
  Eigen::Index segments = 0;
  for (Eigen::Index m = kSegmentFrames; m <= frames; ++m, ++segments) {
    Eigen::MatrixXd xs = x_tob.middleCols(m - kSegmentFrames, kSegmentFrames);
    Eigen::MatrixXd ys = y_tob.middleCols(m - kSegmentFrames, kSegmentFrames);
    for (Eigen::Index b = 0; b < kNumBands; ++b) {
      Eigen::RowVectorXd xr = xs.row(b);
      Eigen::RowVectorXd yr = ys.row(b);
      double alpha = xr.norm() / (yr.norm() + kEps);
      Eigen::RowVectorXd yp = (yr * alpha).cwiseMin(xr * (1.0 + clip));
      yp.array() -= yp.mean();
      xr.array() -= xr.mean();
      yp /= (yp.norm() + kEps);
      xr /= (xr.norm() + kEps);
      total += xr.dot(yp);
    }
  }
  double d = total / static_cast<double>(segments * kNumBands);
  return std::max(0.0, d);
}

}  // namespace tsb
