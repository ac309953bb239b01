// include/tsb/grad_check.h

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

#ifndef TSB_GRAD_CHECK_H_
#define TSB_GRAD_CHECK_H_

#include <cstdint>
#include <functional>
#include <string>

#include "tsb/tensor.h"

namespace tsb {

struct GradCheckOptions {
  // Step of the fourth-order central stencil over x +- eps, x +- 2 eps.
  Real eps = 1e-3;
  // Coordinates probed per tensor; 0 probes every coordinate.
  int samples_per_tensor = 0;
  // Lower bound on the denominator of the relative error.
  Real floor = 1e-6;
  // Only tensors whose name starts with this prefix are probed.
  std::string prefix;
  std::uint64_t seed = 7;
  int max_redraws = 8;
};

struct GradCheckResult {
  Real max_rel_error = 0.0;
  std::string worst;  // "tensor[row,col]"
  Real worst_analytic = 0.0;
  Real worst_numeric = 0.0;
  int probes = 0;
  int kinks = 0;  // probes discarded as non-differentiable and re-drawn
};

using LossFn = std::function<Real(const ParamStore&)>;
using GradFn = std::function<void(const ParamStore&, Grads*)>;

// Compares analytic gradients with the fourth-order central difference
// (8 (f(p + h) - f(p - h)) - (f(p + 2h) - f(p - 2h))) / 12h. Relative error is
// |a - n| / max(|a|, |n|, floor). A failing probe whose fourth difference is
// large against the slope straddles a kink (ReLU, clamp); it is counted and
// replaced by another coordinate of the same tensor.
GradCheckResult GradCheck(ParamStore* store, const LossFn& loss, const GradFn& grad,
                          const GradCheckOptions& options = {});

}  // namespace tsb

#endif  // TSB_GRAD_CHECK_H_
