// src/signal_metrics.cc

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

#include "tsb/signal_metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tsb/errors.h"

namespace tsb {

bool HigherIsBetter(MetricName name) {
  switch (name) {
    case MetricName::kFr:
    case MetricName::kWer:
      return false;
    default:
      return true;
  }
}

std::string ToString(MetricName name) {
  switch (name) {
    case MetricName::kSiSdr: return "si_sdr";
    case MetricName::kSiSdri: return "si_sdri";
    case MetricName::kStoi: return "stoi";
    case MetricName::kFr: return "fr";
    case MetricName::kMap: return "map";
    case MetricName::kMTss: return "m_tss";
    case MetricName::kWer: return "wer";
  }
  return "unknown";
}

MetricName ParseMetricName(const std::string& text) {
  for (auto n : {MetricName::kSiSdr, MetricName::kSiSdri, MetricName::kStoi, MetricName::kFr,
                 MetricName::kMap, MetricName::kMTss, MetricName::kWer}) {
    if (ToString(n) == text) return n;
  }
  throw UsageError("unknown metric name '" + text + "'");
}

namespace {

struct Projection {
  std::vector<double> est;  // mean-removed
  std::vector<double> ref;  // mean-removed
  double ref_energy = 0.0;
  double alpha = 0.0;
  double target_energy = 0.0;
  double residual_energy = 0.0;
};

std::vector<double> RemoveMean(std::span<const double> x) {
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - mean;
  return out;
}

Projection Project(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size())
    throw DataError("si_sdr: length mismatch (" + std::to_string(est.size()) + " vs " +
                    std::to_string(ref.size()) + ")");
  if (est.size() < 2) throw DataError("si_sdr: signals need at least 2 samples");
  Projection p;
  p.est = RemoveMean(est);
  p.ref = RemoveMean(ref);
  double raw_energy = 0.0;
  for (double v : ref) raw_energy += v * v;
  double dot = 0.0;
  for (std::size_t i = 0; i < p.ref.size(); ++i) {
    p.ref_energy += p.ref[i] * p.ref[i];
    dot += p.est[i] * p.ref[i];
  }
  if (p.ref_energy <= 1e-20 * std::max(1.0, raw_energy))
    throw DataError("si_sdr: reference is constant after mean removal");
  p.alpha = dot / (p.ref_energy + kSiSdrEpsilon);
  for (std::size_t i = 0; i < p.ref.size(); ++i) {
    double s = p.alpha * p.ref[i];
    double e = p.est[i] - s;
    p.target_energy += s * s;
    p.residual_energy += e * e;
  }
  return p;
}

double RatioDb(const Projection& p) {
  return 10.0 * std::log10((p.target_energy + kSiSdrEpsilon) / (p.residual_energy + kSiSdrEpsilon));
}

}  // namespace

double SiSdr(std::span<const double> est, std::span<const double> ref) {
  return std::clamp(RatioDb(Project(est, ref)), -kSiSdrClampDb, kSiSdrClampDb);
}

double SiSdr(const AudioSignal& est, const AudioSignal& ref) {
  return SiSdr(est.samples(), ref.samples());
}

double SiSdrImprovement(const AudioSignal& est, const AudioSignal& mix, const AudioSignal& ref) {
  if (est.size() != mix.size())
    throw DataError("si_sdri: estimate and mixture lengths differ");
  return SiSdr(est, ref) - SiSdr(mix, ref);
}

double NegSiSnrLoss(std::span<const double> est, std::span<const double> ref,
                    std::vector<double>* grad) {
  Projection p = Project(est, ref);
  double raw = RatioDb(p);
  double value = std::clamp(raw, -kSiSdrClampDb, kSiSdrClampDb);
  if (grad == nullptr) return -value;

  const std::size_t n = est.size();
  grad->assign(n, 0.0);
  if (raw != value) return -value;

  // Gradient with respect to the mean-removed estimate, then through the
  // mean removal (which subtracts the mean of the gradient).
  const double denom_ref = p.ref_energy + kSiSdrEpsilon;
  const double s_plus = p.target_energy + kSiSdrEpsilon;
  const double e_plus = p.residual_energy + kSiSdrEpsilon;
  const double scale = -10.0 / std::log(10.0);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = p.ref[i];
    double residual = p.est[i] - p.alpha * r;
    double d_target = 2.0 * p.alpha * p.ref_energy * r / denom_ref;
    double d_residual = 2.0 * residual - 2.0 * p.alpha * kSiSdrEpsilon * r / denom_ref;
    double g = scale * (d_target / s_plus - d_residual / e_plus);
    (*grad)[i] = g;
    mean += g;
  }
  mean /= static_cast<double>(n);
  for (double& g : *grad) g -= mean;
  return -value;
}

double FailureRate(std::span<const double> si_sdri_values) {
  if (si_sdri_values.empty()) throw DataError("failure_rate: empty list");
  auto failures = std::count_if(si_sdri_values.begin(), si_sdri_values.end(),
                                [](double v) { return v < kFailureThresholdDb; });
  return 100.0 * static_cast<double>(failures) / static_cast<double>(si_sdri_values.size());
}

double MeanPower(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

NoisyMixture MixAtSnr(const AudioSignal& signal, const AudioSignal& noise,
                      std::optional<double> snr_db, std::uint64_t seed) {
  NoisyMixture out;
  if (!snr_db) {
    out.mixture = signal;
    return out;
  }
  if (noise.size() < signal.size())
    throw DataError("mix_at_snr: noise (" + std::to_string(noise.size()) +
                    " samples) shorter than signal (" + std::to_string(signal.size()) + ")");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, noise.size() - signal.size());
  out.noise_offset = pick(rng);
  auto crop = noise.samples().subspan(out.noise_offset, signal.size());

  double p_signal = MeanPower(signal.samples());
  double p_noise = MeanPower(crop);
  if (p_signal <= 0.0) throw DataError("mix_at_snr: signal has zero power");
  if (p_noise <= 0.0) throw DataError("mix_at_snr: noise crop has zero power");
  out.noise_gain = std::sqrt(p_signal / (p_noise * std::pow(10.0, *snr_db / 10.0)));

  std::vector<double> mixed(signal.size());
  for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] = signal[i] + out.noise_gain * crop[i];
  out.mixture = AudioSignal(std::move(mixed), signal.sample_rate());
  return out;
}

}  // namespace tsb
