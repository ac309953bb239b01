// include/tsb/eval.h

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

#ifndef TSB_EVAL_H_
#define TSB_EVAL_H_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsb/mixture.h"
#include "tsb/model.h"

namespace tsb {

struct WerCounts {
  long substitutions = 0;
  long insertions = 0;
  long deletions = 0;
  long ref_words = 0;
  long Errors() const { return substitutions + insertions + deletions; }
};

std::vector<std::string> SplitWords(const std::string& text);

// Minimal word-level edit alignment with unit costs. Among equal-cost
// alignments a substitution is preferred over an insertion plus a deletion.
WerCounts AlignWords(const std::string& ref, const std::string& hyp);

// Corpus WER: pooled errors over pooled reference words.
double Wer(const std::vector<std::string>& refs, const std::vector<std::string>& hyps);

// All-points average precision of `scores` for binary `positive` flags.
// Frames are ranked by descending score with a stable sort. Throws DataError
// when there is no positive.
double AveragePrecision(const std::vector<Real>& scores, const std::vector<bool>& positive);

// AP of class `cls` using column `cls` of a T x 3 posterior matrix.
double FrameAp(const Mat& posteriors, const std::vector<FrameLabel>& labels, FrameLabel cls);

struct PvadScores {
  std::optional<double> ap[kNumFrameClasses];
  std::optional<double> map;    // mean over classes that have positives
  std::optional<double> m_tss;  // AP of tss
};
PvadScores ScorePvad(const Mat& posteriors, const std::vector<FrameLabel>& labels);

inline const std::vector<double> kTestConditions = {0.0, 0.2, 0.4, 0.6};

// "0.0", "0.2", "0.4", "0.6" when the ratio is within one 320-sample frame of
// a test condition, "other" otherwise.
std::string ConditionLabel(double overlap_ratio, std::size_t mixture_len);

// Produces a Prediction for an example; implemented by trained models and by
// oracle stubs.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Prediction Predict(const Example& ex, SubTask sub) const = 0;
};

class ModelPredictor : public Predictor {
 public:
  explicit ModelPredictor(const TaskModel* model) : model_(model) {}
  Prediction Predict(const Example& ex, SubTask sub) const override;

 private:
  const TaskModel* model_;
};

// Perfect outputs: the target reference, one-hot true labels and the true
// transcript.
class OraclePredictor : public Predictor {
 public:
  Prediction Predict(const Example& ex, SubTask sub) const override;
};

struct EvalOptions {
  int threads = 1;
  std::string checkpoint_id;
  nlohmann::json metadata = nlohmann::json::object();
};

// Scores every example and returns the report document:
//   {format, task, checkpoint, metadata, rows: [...],
//    aggregates: {overall: {...}, conditions: {"0.0": {...}, ...}}}
nlohmann::json Evaluate(SubTask task, const std::vector<Example>& examples, const Predictor& predictor,
                        const EvalOptions& options = {});

// Aggregates recomputed from report rows.
nlohmann::json ComputeAggregates(SubTask task, const nlohmann::json& rows);

// Throws DataError unless the report is well formed and its stored aggregates
// equal the aggregates recomputed from its rows.
void ValidateReport(const nlohmann::json& report);

}  // namespace tsb

#endif  // TSB_EVAL_H_
