// include/tsb/analysis.h

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

#ifndef TSB_ANALYSIS_H_
#define TSB_ANALYSIS_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsb/checkpoint.h"
#include "tsb/tensor.h"

namespace tsb {

// Ranks starting at 1; tied values share the average of their ranks.
std::vector<double> AverageRanks(const std::vector<double>& x);

// Pearson correlation of average ranks. Throws DataError for unequal lengths,
// fewer than 3 values or a constant input.
double Spearman(const std::vector<double>& x, const std::vector<double>& y);

struct ScoreColumn {
  std::string task;
  std::string metric;
  bool higher_is_better = true;
  std::map<std::string, double> values;  // model -> value
};

// One column per task, in order of first appearance.
struct TaskScoreTable {
  std::vector<std::string> models;  // order of first appearance
  std::vector<ScoreColumn> columns;
};

// CSV with header "model,task,metric,value,higher_is_better". Each task must
// use a single metric; duplicated (model, task) cells are rejected.
TaskScoreTable ReadScoreTable(const std::filesystem::path& path);
TaskScoreTable ParseScoreTable(const std::string& csv, const std::string& source = "scores.csv");

struct CorrelationMatrix {
  std::vector<std::string> tasks;
  Mat rho;
  nlohmann::json ToJson() const;
};

// Lower-is-better columns are negated before ranking, so every entry compares
// "better" with "better". Each pair uses the models present in both columns.
CorrelationMatrix ComputeCorrelationMatrix(const TaskScoreTable& table);

inline const std::vector<std::string> kWeightStreams = {"extractor", "spkenc_key", "spkenc_value"};
// Checkpoint tensor holding the logits of a stream.
std::string WeightStreamTensor(const std::string& stream);

// Softmax-normalized layer weights per stream. Throws DataError naming the
// stream when its tensor is missing.
std::map<std::string, RowVec> ExportLayerWeights(const Checkpoint& ckpt);

void WriteLayerWeightsCsv(const std::filesystem::path& path,
                          const std::map<std::string, RowVec>& weights);
void WriteLayerWeightsSvg(const std::filesystem::path& path,
                          const std::map<std::string, RowVec>& weights);

}  // namespace tsb

#endif  // TSB_ANALYSIS_H_
