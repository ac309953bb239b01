// src/eval.cc

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

#include "tsb/eval.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tsb/ctc.h"
#include "tsb/errors.h"
#include "tsb/parallel.h"
#include "tsb/signal_metrics.h"
#include "tsb/stoi.h"

namespace tsb {

std::vector<std::string> SplitWords(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> words;
  std::string w;
  while (is >> w) words.push_back(w);
  return words;
}

WerCounts AlignWords(const std::string& ref, const std::string& hyp) {
  const auto r = SplitWords(ref), h = SplitWords(hyp);
  const std::size_t n = r.size(), m = h.size();
  std::vector<std::vector<long>> d(n + 1, std::vector<long>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<long>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const long diag = d[i - 1][j - 1] + (r[i - 1] == h[j - 1] ? 0 : 1);
      d[i][j] = std::min({diag, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  WerCounts c;
  c.ref_words = static_cast<long>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (r[i - 1] == h[j - 1] ? 0 : 1)) {
      if (r[i - 1] != h[j - 1]) ++c.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++c.deletions;
      --i;
    } else {
      ++c.insertions;
      --j;
    }
  }
  return c;
}

double Wer(const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
  if (refs.size() != hyps.size())
    throw DataError("wer: " + std::to_string(refs.size()) + " references vs " +
                    std::to_string(hyps.size()) + " hypotheses");
  long errors = 0, words = 0;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const WerCounts c = AlignWords(refs[k], hyps[k]);
    errors += c.Errors();
    words += c.ref_words;
  }
  if (words == 0) throw DataError("wer: reference corpus has no words");
  return static_cast<double>(errors) / static_cast<double>(words);
}

double AveragePrecision(const std::vector<Real>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw DataError("average precision: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto total = std::count(positive.begin(), positive.end(), true);
  if (total == 0) throw DataError("average precision undefined: no positive frames");
  double ap = 0.0;
  long hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!positive[order[k]]) continue;
    ++hits;
    ap += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return ap / static_cast<double>(total);
}

double FrameAp(const Mat& posteriors, const std::vector<FrameLabel>& labels, FrameLabel cls) {
  if (posteriors.rows() != static_cast<Eigen::Index>(labels.size()) ||
      posteriors.cols() != kNumFrameClasses)
    throw DataError("frame AP: posterior shape does not match labels");
  const int c = static_cast<int>(cls);
  std::vector<Real> scores(labels.size());
  std::vector<bool> pos(labels.size());
  for (std::size_t t = 0; t < labels.size(); ++t) {
    scores[t] = posteriors(static_cast<Eigen::Index>(t), c);
    pos[t] = labels[t] == cls;
  }
  return AveragePrecision(scores, pos);
}

PvadScores ScorePvad(const Mat& posteriors, const std::vector<FrameLabel>& labels) {
  PvadScores s;
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < kNumFrameClasses; ++c) {
    const auto cls = static_cast<FrameLabel>(c);
    if (std::find(labels.begin(), labels.end(), cls) == labels.end()) continue;
    s.ap[c] = FrameAp(posteriors, labels, cls);
    sum += *s.ap[c];
    ++n;
  }
  if (n > 0) s.map = sum / n;
  s.m_tss = s.ap[static_cast<int>(FrameLabel::kTss)];
  return s;
}

std::string ConditionLabel(double overlap_ratio, std::size_t mixture_len) {
  const double tol = mixture_len > 0 ? 320.0 / static_cast<double>(mixture_len) : 0.0;
  for (double c : kTestConditions) {
    if (std::abs(overlap_ratio - c) <= tol + 1e-9) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "%.1f", c);
      return buf;
    }
  }
  return "other";
}

Prediction ModelPredictor::Predict(const Example& ex, SubTask sub) const {
  return model_->Predict(ex, sub);
}

Prediction OraclePredictor::Predict(const Example& ex, SubTask sub) const {
  Prediction p;
  switch (sub) {
    case SubTask::kTse:
    case SubTask::kPse:
      p.estimate.assign(ex.target.samples().begin(), ex.target.samples().end());
      break;
    case SubTask::kPvad:
      p.posteriors = Mat::Zero(static_cast<Eigen::Index>(ex.labels.size()), kNumFrameClasses);
      for (std::size_t t = 0; t < ex.labels.size(); ++t)
        p.posteriors(static_cast<Eigen::Index>(t), static_cast<int>(ex.labels[t])) = 1.0;
      break;
    case SubTask::kTsasr:
      p.tokens = EncodeTranscript(ex.transcript);
      break;
  }
  return p;
}

namespace {

const char* kClassNames[kNumFrameClasses] = {"tss", "ntss", "ns"};

nlohmann::json OptionalNumber(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json ScoreRow(SubTask task, const Example& ex, const Prediction& p) {
  nlohmann::json row = {{"id", ex.id},
                        {"overlap_ratio", ex.overlap_ratio},
                        {"condition", ConditionLabel(ex.overlap_ratio, ex.mixture_len)}};
  nlohmann::json m = nlohmann::json::object();
  switch (task) {
    case SubTask::kTse:
    case SubTask::kPse: {
      if (p.estimate.size() != ex.target.size())
        throw DataError("estimate for " + ex.id + " has the wrong length");
      const AudioSignal est(p.estimate);
      const double sdr = SiSdr(est, ex.target);
      const double sdr_mix = SiSdr(ex.mixture, ex.target);
      m["si_sdr"] = sdr;
      m["si_sdr_mix"] = sdr_mix;
      m["si_sdri"] = sdr - sdr_mix;
      try {
        m["stoi"] = Stoi(est, ex.target);
      } catch (const DataError&) {
        m["stoi"] = nullptr;
      }
      break;
    }
    case SubTask::kPvad: {
      const PvadScores s = ScorePvad(p.posteriors, ex.labels);
      for (int c = 0; c < kNumFrameClasses; ++c) m[std::string("ap_") + kClassNames[c]] = OptionalNumber(s.ap[c]);
      m["map"] = OptionalNumber(s.map);
      m["m_tss"] = OptionalNumber(s.m_tss);
      nlohmann::json post = nlohmann::json::array();
      for (Eigen::Index t = 0; t < p.posteriors.rows(); ++t)
        post.push_back({p.posteriors(t, 0), p.posteriors(t, 1), p.posteriors(t, 2)});
      row["frames"] = {{"labels", EncodeLabels(ex.labels)}, {"posteriors", post}};
      break;
    }
    case SubTask::kTsasr: {
      const std::string ref = NormalizeTranscript(ex.transcript);
      const std::string hyp = DecodeTokens(p.tokens);
      const WerCounts c = AlignWords(ref, hyp);
      row["ref"] = ref;
      row["hyp"] = hyp;
      m["substitutions"] = c.substitutions;
      m["insertions"] = c.insertions;
      m["deletions"] = c.deletions;
      m["ref_words"] = c.ref_words;
      m["wer"] = c.ref_words > 0 ? nlohmann::json(static_cast<double>(c.Errors()) / c.ref_words)
                                 : nlohmann::json(nullptr);
      break;
    }
  }
  row["metrics"] = m;
  return row;
}

// Mean of the non-null values of metric `key`; null when there are none.
nlohmann::json MeanOf(const std::vector<const nlohmann::json*>& rows, const std::string& key) {
  double sum = 0.0;
  long n = 0;
  for (const auto* r : rows) {
    const auto& v = (*r)["metrics"][key];
    if (v.is_null()) continue;
    sum += v.get<double>();
    ++n;
  }
  return n > 0 ? nlohmann::json(sum / static_cast<double>(n)) : nlohmann::json(nullptr);
}

nlohmann::json Aggregate(SubTask task, const std::vector<const nlohmann::json*>& rows) {
  nlohmann::json a = {{"count", rows.size()}};
  if (rows.empty()) return a;
  switch (task) {
    case SubTask::kTse:
    case SubTask::kPse: {
      std::vector<double> sdri;
      long stoi_count = 0;
      for (const auto* r : rows) {
        sdri.push_back((*r)["metrics"]["si_sdri"].get<double>());
        stoi_count += !(*r)["metrics"]["stoi"].is_null();
      }
      a["si_sdri"] = MeanOf(rows, "si_sdri");
      a["si_sdr"] = MeanOf(rows, "si_sdr");
      a["stoi"] = MeanOf(rows, "stoi");
      a["stoi_count"] = stoi_count;
      a["fr"] = FailureRate(sdri);
      break;
    }
    case SubTask::kPvad: {
      std::vector<Real> scores[kNumFrameClasses];
      std::vector<FrameLabel> labels;
      for (const auto* r : rows) {
        const auto frame_labels = DecodeLabels((*r)["frames"]["labels"].get<std::string>());
        const auto& post = (*r)["frames"]["posteriors"];
        if (post.size() != frame_labels.size()) throw DataError("report row frame count mismatch");
        for (std::size_t t = 0; t < frame_labels.size(); ++t) {
          for (int c = 0; c < kNumFrameClasses; ++c) scores[c].push_back(post[t][c].get<double>());
        }
        labels.insert(labels.end(), frame_labels.begin(), frame_labels.end());
      }
      double sum = 0.0;
      int n = 0;
      nlohmann::json skipped = nlohmann::json::array();
      for (int c = 0; c < kNumFrameClasses; ++c) {
        std::vector<bool> pos(labels.size());
        for (std::size_t t = 0; t < labels.size(); ++t) pos[t] = static_cast<int>(labels[t]) == c;
        if (std::find(pos.begin(), pos.end(), true) == pos.end()) {
          a[std::string("ap_") + kClassNames[c]] = nullptr;
          skipped.push_back(kClassNames[c]);
          continue;
        }
        const double ap = AveragePrecision(scores[c], pos);
        a[std::string("ap_") + kClassNames[c]] = ap;
        sum += ap;
        ++n;
      }
      a["map"] = n > 0 ? nlohmann::json(sum / n) : nlohmann::json(nullptr);
      a["m_tss"] = a["ap_tss"];
      a["skipped_classes"] = skipped;
      a["map_utt_mean"] = MeanOf(rows, "map");
      a["m_tss_utt_mean"] = MeanOf(rows, "m_tss");
      break;
    }
    case SubTask::kTsasr: {
      long s = 0, i = 0, d = 0, w = 0;
      for (const auto* r : rows) {
        const auto& m = (*r)["metrics"];
        s += m["substitutions"].get<long>();
        i += m["insertions"].get<long>();
        d += m["deletions"].get<long>();
        w += m["ref_words"].get<long>();
      }
      a["substitutions"] = s;
      a["insertions"] = i;
      a["deletions"] = d;
      a["ref_words"] = w;
      a["wer"] = w > 0 ? nlohmann::json(static_cast<double>(s + i + d) / w) : nlohmann::json(nullptr);
      a["wer_utt_mean"] = MeanOf(rows, "wer");
      break;
    }
  }
  return a;
}

bool SameJson(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.is_number() && b.is_number()) {
    if (a.is_number_float() || b.is_number_float()) {
      const double x = a.get<double>(), y = b.get<double>();
      return std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(x));
    }
    return a == b;
  }
  if (a.type() != b.type()) return false;
  if (a.is_object()) {
    if (a.size() != b.size()) return false;
    for (const auto& [k, v] : a.items()) {
      if (!b.contains(k) || !SameJson(v, b[k])) return false;
    }
    return true;
  }
  if (a.is_array()) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!SameJson(a[i], b[i])) return false;
    }
    return true;
  }
  return a == b;
}

}  // namespace

nlohmann::json ComputeAggregates(SubTask task, const nlohmann::json& rows) {
  std::vector<const nlohmann::json*> all;
  for (const auto& r : rows) all.push_back(&r);
  nlohmann::json out = {{"overall", Aggregate(task, all)}};
  nlohmann::json conditions = nlohmann::json::object();
  std::vector<std::string> labels;
  for (double c : kTestConditions) labels.push_back(ConditionLabel(c, 0));
  labels.push_back("other");
  for (const auto& label : labels) {
    std::vector<const nlohmann::json*> group;
    for (const auto* r : all) {
      if ((*r)["condition"] == label) group.push_back(r);
    }
    if (label == "other" && group.empty()) continue;
    conditions[label] = Aggregate(task, group);
  }
  out["conditions"] = conditions;
  return out;
}

nlohmann::json Evaluate(SubTask task, const std::vector<Example>& examples, const Predictor& predictor,
                        const EvalOptions& options) {
  if (examples.empty()) throw DataError("evaluation set is empty");
  std::vector<nlohmann::json> rows(examples.size());
  ParallelFor(examples.size(), options.threads, [&](std::size_t i) {
    rows[i] = ScoreRow(task, examples[i], predictor.Predict(examples[i], task));
  });
  nlohmann::json report;
  report["format"] = "tsb-report/1";
  report["task"] = ToString(task);
  report["checkpoint"] = options.checkpoint_id;
  nlohmann::json meta = options.metadata.is_object() ? options.metadata : nlohmann::json::object();
  meta["fr_basis"] = "si_sdri";
  meta["fr_threshold_db"] = kFailureThresholdDb;
  meta["ap_integration"] = "all_points";
  meta["map_pooling"] = "corpus_frames";
  meta["wer_pooling"] = "corpus";
  meta["overlap_basis"] = "mixture_length";
  report["metadata"] = meta;
  report["rows"] = rows;
  report["aggregates"] = ComputeAggregates(task, report["rows"]);
  return report;
}

void ValidateReport(const nlohmann::json& report) {
  for (const char* key : {"format", "task", "checkpoint", "metadata", "rows", "aggregates"}) {
    if (!report.contains(key)) throw DataError(std::string("report lacks field '") + key + "'");
  }
  if (report["format"] != "tsb-report/1") throw DataError("unknown report format");
  const SubTask task = ParseSubTask(report["task"].get<std::string>());
  if (!report["rows"].is_array() || report["rows"].empty()) throw DataError("report has no rows");
  nlohmann::json recomputed;
  try {
    recomputed = ComputeAggregates(task, report["rows"]);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report rows: ") + e.what());
  }
  if (!SameJson(recomputed, report["aggregates"]))
    throw DataError("report aggregates do not match the rows");
  const auto& overall = report["aggregates"]["overall"];
  long count = 0;
  for (const auto& [k, v] : report["aggregates"]["conditions"].items()) {
    (void)k;
    count += v["count"].get<long>();
  }
  if (count != overall["count"].get<long>())
    throw DataError("per-condition counts do not add up to the overall count");
}

}  // namespace tsb
