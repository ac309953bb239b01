// src/analysis.cc

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

#include "tsb/analysis.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tsb/errors.h"
#include "tsb/layers.h"

namespace tsb {

std::vector<double> AverageRanks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double Spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("spearman: inputs differ in length");
  if (x.size() < 3) throw DataError("spearman: need at least 3 paired values");
  const auto rx = AverageRanks(x), ry = AverageRanks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("spearman: constant input has no ranking");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    else if (c == ',' && !quoted) {
      out.push_back(Trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(Trim(cell));
  return out;
}

bool ParseFlag(const std::string& s, const std::string& where) {
  std::string v = s;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw DataError(where + ": bad higher_is_better value '" + s + "'");
}

}  // namespace

TaskScoreTable ParseScoreTable(const std::string& csv, const std::string& source) {
  std::istringstream is(csv);
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(is, line)) {
    ++lineno;
    if (!Trim(line).empty()) header = SplitCsv(line);
  }
  const std::vector<std::string> expected = {"model", "task", "metric", "value", "higher_is_better"};
  if (header != expected)
    throw DataError(source + ": header must be model,task,metric,value,higher_is_better");

  TaskScoreTable table;
  while (std::getline(is, line)) {
    ++lineno;
    if (Trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto cells = SplitCsv(line);
    if (cells.size() != 5) throw DataError(where + ": expected 5 fields");
    const std::string& model = cells[0];
    const std::string& task = cells[1];
    const std::string& metric = cells[2];
    double value;
    try {
      std::size_t used = 0;
      value = std::stod(cells[3], &used);
      if (used != cells[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError(where + ": bad value '" + cells[3] + "'");
    }
    const bool hib = ParseFlag(cells[4], where);
    if (std::find(table.models.begin(), table.models.end(), model) == table.models.end())
      table.models.push_back(model);
    auto col = std::find_if(table.columns.begin(), table.columns.end(),
                            [&](const ScoreColumn& c) { return c.task == task; });
    if (col == table.columns.end()) {
      table.columns.push_back(ScoreColumn{task, metric, hib, {}});
      col = table.columns.end() - 1;
    }
    if (col->metric != metric)
      throw DataError(where + ": task '" + task + "' already uses metric '" + col->metric +
                      "'; keep exactly one metric per task");
    if (col->higher_is_better != hib)
      throw DataError(where + ": inconsistent higher_is_better for task '" + task + "'");
    if (!col->values.emplace(model, value).second)
      throw DataError(where + ": duplicate cell for model '" + model + "', task '" + task + "'");
  }
  if (table.columns.empty()) throw DataError(source + ": no scores");
  return table;
}

TaskScoreTable ReadScoreTable(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open score table " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ParseScoreTable(ss.str(), path.string());
}

nlohmann::json CorrelationMatrix::ToJson() const {
  nlohmann::json m = nlohmann::json::array();
  for (Eigen::Index i = 0; i < rho.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < rho.cols(); ++j) row.push_back(rho(i, j));
    m.push_back(row);
  }
  return {{"method", "spearman"}, {"direction_normalized", true}, {"tasks", tasks}, {"matrix", m}};
}

CorrelationMatrix ComputeCorrelationMatrix(const TaskScoreTable& table) {
  if (table.models.size() < 3) throw DataError("correlation matrix needs at least 3 models");
  CorrelationMatrix out;
  const auto n = static_cast<Eigen::Index>(table.columns.size());
  out.rho = Mat::Identity(n, n);
  for (const auto& c : table.columns) out.tasks.push_back(c.task);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const ScoreColumn& a = table.columns[i];
      const ScoreColumn& b = table.columns[j];
      std::vector<double> x, y;
      for (const auto& model : table.models) {
        auto ia = a.values.find(model), ib = b.values.find(model);
        if (ia == a.values.end() || ib == b.values.end()) continue;
        x.push_back(a.higher_is_better ? ia->second : -ia->second);
        y.push_back(b.higher_is_better ? ib->second : -ib->second);
      }
      double r;
      try {
        r = Spearman(x, y);
      } catch (const DataError& e) {
        throw DataError("tasks '" + a.task + "' and '" + b.task + "': " + e.what());
      }
      out.rho(i, j) = out.rho(j, i) = r;
    }
  }
  return out;
}

std::string WeightStreamTensor(const std::string& stream) {
  if (stream == "extractor") return "param/encoder.extractor_weights.logits";
  if (stream == "spkenc_key") return "param/encoder.mhfa.key_weights.logits";
  if (stream == "spkenc_value") return "param/encoder.mhfa.value_weights.logits";
  throw UsageError("unknown layer-weight stream '" + stream + "'");
}

std::map<std::string, RowVec> ExportLayerWeights(const Checkpoint& ckpt) {
  std::map<std::string, RowVec> out;
  for (const auto& stream : kWeightStreams) {
    const NamedTensor* t = ckpt.Find(WeightStreamTensor(stream));
    if (t == nullptr) throw DataError("checkpoint lacks layer weights for stream '" + stream + "'");
    out[stream] = Softmax(t->value.row(0));
  }
  return out;
}

void WriteLayerWeightsCsv(const std::filesystem::path& path,
                          const std::map<std::string, RowVec>& weights) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "stream,layer,weight\n";
  os.precision(17);
  for (const auto& stream : kWeightStreams) {
    auto it = weights.find(stream);
    if (it == weights.end()) continue;
    for (Eigen::Index l = 0; l < it->second.size(); ++l)
      os << stream << ',' << l << ',' << it->second[l] << '\n';
  }
}

void WriteLayerWeightsSvg(const std::filesystem::path& path,
                          const std::map<std::string, RowVec>& weights) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  const int panel_w = 260, panel_h = 180, margin = 30;
  const int width = margin + static_cast<int>(kWeightStreams.size()) * (panel_w + margin);
  const int height = panel_h + 3 * margin;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  int x0 = margin;
  for (const auto& stream : kWeightStreams) {
    auto it = weights.find(stream);
    if (it == weights.end()) continue;
    const RowVec& w = it->second;
    const double top = std::max(w.maxCoeff(), 1e-12);
    const double bar = static_cast<double>(panel_w) / static_cast<double>(w.size());
    const int base = margin + panel_h;
    os << "<text x=\"" << x0 << "\" y=\"" << margin - 10 << "\">" << stream << "</text>\n";
    os << "<line x1=\"" << x0 << "\" y1=\"" << base << "\" x2=\"" << x0 + panel_w << "\" y2=\""
       << base << "\" stroke=\"black\"/>\n";
    for (Eigen::Index l = 0; l < w.size(); ++l) {
      const double h = panel_h * w[l] / top;
      os << "<rect x=\"" << x0 + l * bar + 2 << "\" y=\"" << base - h << "\" width=\""
         << bar - 4 << "\" height=\"" << h << "\" fill=\"#4a7ab5\"><title>layer " << l << ": "
         << w[l] << "</title></rect>\n";
      os << "<text x=\"" << x0 + (l + 0.5) * bar - 3 << "\" y=\"" << base + 14 << "\">" << l
         << "</text>\n";
    }
    x0 += panel_w + margin;
  }
  os << "</svg>\n";
}

}  // namespace tsb
