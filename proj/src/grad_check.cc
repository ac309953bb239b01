// src/grad_check.cc

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

#include "tsb/grad_check.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "tsb/seed.h"

namespace tsb {

namespace {

struct Probe {
  Real numeric = 0.0;
  bool kink = false;
};

Probe Measure(ParamStore* store, Mat& value, Eigen::Index i, Real analytic, Real f0,
              const LossFn& loss, const GradCheckOptions& o) {
  const Real saved = value.data()[i];
  auto at = [&](Real offset) {
    value.data()[i] = saved + offset;
    const Real f = loss(*store);
    value.data()[i] = saved;
    return f;
  };
  const Real h = o.eps;
  const Real fp = at(h), fm = at(-h), fp2 = at(2.0 * h), fm2 = at(-2.0 * h);
  Probe p;
  p.numeric = (8.0 * (fp - fm) - (fp2 - fm2)) / (12.0 * h);
  const Real scale = std::max({std::abs(analytic), std::abs(p.numeric), o.floor});
  if (std::abs(analytic - p.numeric) / scale <= 1e-6) return p;
  // On a smooth stretch the fourth difference is O(h^4); a slope jump J inside
  // the stencil makes it O(J h) and biases the estimate by O(J).
  const Real fourth = std::abs(fp2 - 4.0 * fp + 6.0 * f0 - 4.0 * fm + fm2) / h;
  p.kink = fourth > 1e-5 * scale;
  return p;
}

}  // namespace

GradCheckResult GradCheck(ParamStore* store, const LossFn& loss, const GradFn& grad,
                          const GradCheckOptions& o) {
  GradCheckResult result;
  Grads analytic(*store);
  grad(*store, &analytic);
  const Real f0 = loss(*store);
  std::mt19937_64 rng(o.seed);

  for (std::size_t t = 0; t < store->size(); ++t) {
    const ParamId id = store->At(t);
    const std::string& name = store->Name(id);
    if (!name.starts_with(o.prefix)) continue;
    Mat& value = (*store)[id];
    const Eigen::Index size = value.size();
    if (size == 0) continue;

    std::vector<Eigen::Index> coords;
    const bool all = o.samples_per_tensor <= 0 || o.samples_per_tensor >= size;
    std::uniform_int_distribution<Eigen::Index> pick(0, size - 1);
    std::set<Eigen::Index> used;
    if (all) {
      for (Eigen::Index i = 0; i < size; ++i) coords.push_back(i);
    } else {
      while (static_cast<int>(coords.size()) < o.samples_per_tensor) {
        const Eigen::Index i = pick(rng);
        if (used.insert(i).second) coords.push_back(i);
      }
    }

    int redraws = 0;
    for (std::size_t c = 0; c < coords.size(); ++c) {
      const Eigen::Index i = coords[c];
      const Real a = analytic[id].data()[i];
      const Probe p = Measure(store, value, i, a, f0, loss, o);
      if (p.kink) {
        ++result.kinks;
        if (!all && redraws < o.max_redraws && static_cast<Eigen::Index>(used.size()) < size) {
          ++redraws;
          Eigen::Index j;
          do {
            j = pick(rng);
          } while (!used.insert(j).second);
          coords.push_back(j);
        }
        continue;
      }
      ++result.probes;
      const Real err =
          std::abs(a - p.numeric) / std::max({std::abs(a), std::abs(p.numeric), o.floor});
      if (err > result.max_rel_error || result.worst.empty()) {
        result.max_rel_error = std::max(result.max_rel_error, err);
        if (err >= result.max_rel_error) {
          const Eigen::Index r = i / value.cols(), col = i % value.cols();
          result.worst = name + "[" + std::to_string(r) + "," + std::to_string(col) + "]";
          result.worst_analytic = a;
          result.worst_numeric = p.numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace tsb
