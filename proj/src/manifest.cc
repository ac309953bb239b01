// src/manifest.cc

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

#include "tsb/manifest.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include <json.hpp>

#include "tsb/errors.h"

namespace tsb {

namespace fs = std::filesystem;
using nlohmann::json;

PlacementPlan ManifestRecord::Plan() const {
  PlacementPlan plan;
  plan.len_a = len_a;
  plan.len_b = len_b;
  plan.offset_a = offset_a;
  plan.offset_b = offset_b;
  plan.mixture_len = mixture_len;
  plan.mode = mode;
  plan.requested_ratio = requested_overlap;
  return plan;
}

fs::path Manifest::Resolve(const std::string& rel) const {
  fs::path p(rel);
  return p.is_absolute() ? p : base_dir / p;
}

namespace {

json ToJson(const ManifestRecord& r) {
  json j;
  j["id"] = r.id;
  j["mixture"] = r.mixture;
  j["target"] = r.target;
  j["enrollment"] = r.enrollment;
  j["speaker"] = r.speaker;
  j["interferer_speaker"] = r.interferer_speaker;
  j["labels"] = EncodeLabels(r.labels);
  if (r.snr_db) j["snr_db"] = *r.snr_db;
  else j["snr_db"] = "clean";
  j["overlap_ratio"] = r.overlap_ratio;
  j["requested_overlap"] = r.requested_overlap;
  j["overlap_basis"] = "mixture_length";
  j["offsets"] = {{"a", r.offset_a}, {"b", r.offset_b}};
  j["lengths"] = {{"a", r.len_a}, {"b", r.len_b}};
  j["mixture_len"] = r.mixture_len;
  j["mode"] = ToString(r.mode);
  if (r.transcript) j["transcript"] = *r.transcript;
  j["headroom_gain"] = r.headroom_gain;
  j["noise_gain"] = r.noise_gain;
  if (!r.source_target.empty()) {
    j["sources"] = {{"target", r.source_target},
                    {"interferer", r.source_interferer},
                    {"noise", r.source_noise.empty() ? json() : json(r.source_noise)},
                    {"synth_seed", r.synth_seed},
                    {"loop_noise", r.loop_noise}};
  }
  return j;
}

ManifestRecord FromJson(const json& j) {
  ManifestRecord r;
  r.id = j.at("id").get<std::string>();
  r.mixture = j.at("mixture").get<std::string>();
  r.target = j.at("target").get<std::string>();
  r.enrollment = j.at("enrollment").get<std::string>();
  r.speaker = j.at("speaker").get<std::string>();
  r.interferer_speaker = j.at("interferer_speaker").get<std::string>();
  r.labels = DecodeLabels(j.at("labels").get<std::string>());
  const auto& snr = j.at("snr_db");
  if (snr.is_string()) {
    if (snr.get<std::string>() != "clean") throw DataError("snr_db must be a number or \"clean\"");
  } else {
    r.snr_db = snr.get<double>();
  }
  r.overlap_ratio = j.at("overlap_ratio").get<double>();
  r.requested_overlap = j.value("requested_overlap", r.overlap_ratio);
  r.offset_a = j.at("offsets").at("a").get<std::size_t>();
  r.offset_b = j.at("offsets").at("b").get<std::size_t>();
  if (j.contains("lengths")) {
    r.len_a = j["lengths"].at("a").get<std::size_t>();
    r.len_b = j["lengths"].at("b").get<std::size_t>();
  }
  r.mixture_len = j.value("mixture_len", std::size_t{0});
  r.mode = ParseMixMode(j.at("mode").get<std::string>());
  if (j.contains("transcript")) r.transcript = j["transcript"].get<std::string>();
  r.headroom_gain = j.value("headroom_gain", 1.0);
  r.noise_gain = j.value("noise_gain", 0.0);
  if (j.contains("sources")) {
    const auto& src = j["sources"];
    r.source_target = src.at("target").get<std::string>();
    r.source_interferer = src.at("interferer").get<std::string>();
    if (!src.at("noise").is_null()) r.source_noise = src["noise"].get<std::string>();
    r.synth_seed = src.at("synth_seed").get<std::uint64_t>();
    r.loop_noise = src.value("loop_noise", true);
  }
  return r;
}

}  // namespace

void WriteManifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write manifest " + path.string());
  for (const auto& r : records) os << ToJson(r).dump() << '\n';
  if (!os) throw DataError("write failed for " + path.string());
}

Manifest ReadManifest(const fs::path& path, bool check_files) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path.string());
  Manifest manifest;
  manifest.base_dir = path.parent_path();
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestRecord r;
    try {
      r = FromJson(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(r.id).second) throw DataError("duplicate manifest id '" + r.id + "'");
    if (check_files) {
      for (const auto* f : {&r.mixture, &r.target, &r.enrollment}) {
        if (!fs::exists(manifest.Resolve(*f)))
          throw DataError("record " + r.id + ": missing file " + manifest.Resolve(*f).string());
      }
    }
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

MixtureSample LoadSample(const Manifest& manifest, const ManifestRecord& record) {
  MixtureSample s;
  s.id = record.id;
  s.mixture = ReadWav(manifest.Resolve(record.mixture));
  s.target_ref = ReadWav(manifest.Resolve(record.target));
  s.enrollment = ReadWav(manifest.Resolve(record.enrollment));
  if (s.mixture.size() != s.target_ref.size())
    throw DataError("record " + record.id + ": mixture and target lengths differ");
  s.labels = record.labels;
  s.snr_db = record.snr_db;
  s.plan = record.Plan();
  if (s.plan.mixture_len == 0) s.plan.mixture_len = s.mixture.size();
  s.transcript = record.transcript.value_or("");
  s.speaker = record.speaker;
  s.interferer_speaker = record.interferer_speaker;
  s.noise_gain = record.noise_gain;
  s.headroom_gain = record.headroom_gain;
  return s;
}

MixtureSample Resynthesize(const Manifest& manifest, const ManifestRecord& record) {
  if (record.source_target.empty() || record.source_interferer.empty())
    throw DataError("record " + record.id + " has no source provenance");
  if (record.snr_db.has_value() == record.source_noise.empty())
    throw DataError("record " + record.id + ": noise source and snr_db disagree");
  AudioSignal noise;
  if (!record.source_noise.empty()) noise = ReadWav(manifest.Resolve(record.source_noise));
  MixtureSample s = Synthesize(record.Plan(), ReadWav(manifest.Resolve(record.source_target)),
                               ReadWav(manifest.Resolve(record.source_interferer)),
                               record.source_noise.empty() ? nullptr : &noise, record.snr_db,
                               record.synth_seed, record.loop_noise);
  s.id = record.id;
  s.enrollment = ReadWav(manifest.Resolve(record.enrollment));
  return s;
}

namespace {

std::string RelativeTo(const fs::path& p, const fs::path& base) {
  const fs::path rel = fs::proximate(fs::absolute(p), fs::absolute(base));
  return rel.generic_string();
}

std::vector<fs::path> ListWavs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("noise directory not readable: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no WAV files in noise directory " + dir.string());
  return out;
}

std::string RecordId(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mix%05d", index);
  return buf;
}

}  // namespace

std::vector<ManifestRecord> BuildCorpus(const SimulationConfig& config) {
  if (config.n_mixtures <= 0) throw UsageError("n_mixtures must be positive");
  if (config.overlap_min < 0 || config.overlap_max > 1 || config.overlap_min > config.overlap_max)
    throw UsageError("overlap range must satisfy 0 <= min <= max <= 1");
  if (config.snr_min > config.snr_max) throw UsageError("snr_min exceeds snr_max");

  const SpeakerCorpus corpus = ScanCorpus(config.corpus_dir);
  if (corpus.by_speaker.size() < 2)
    throw DataError("insufficient speakers: need at least 2, found " +
                    std::to_string(corpus.by_speaker.size()));

  const auto min_enroll = static_cast<std::size_t>(std::ceil(config.min_enroll_sec * kSampleRate));
  std::vector<const UtteranceRef*> targets;
  std::vector<const UtteranceRef*> all;
  for (const auto& [spk, utts] : corpus.by_speaker) {
    for (const auto& u : utts) {
      all.push_back(&u);
      bool has_enrollment = std::any_of(utts.begin(), utts.end(), [&](const UtteranceRef& o) {
        return o.path != u.path && o.length >= min_enroll;
      });
      if (has_enrollment) targets.push_back(&u);
    }
  }
  if (targets.empty()) throw DataError("no speaker has an utterance with an eligible enrollment");

  std::vector<fs::path> noises;
  if (config.noise_dir) noises = ListWavs(*config.noise_dir);

  fs::create_directories(config.out_dir / "wav");

  const auto n = static_cast<std::size_t>(config.n_mixtures);
  std::vector<ManifestRecord> records(n);
  std::vector<std::exception_ptr> errors(n);

  auto build_one = [&](std::size_t index) {
    std::mt19937_64 rng(DeriveSeed(config.seed, index));
    double ratio = config.overlap_conditions.empty()
                       ? std::uniform_real_distribution<double>(config.overlap_min, config.overlap_max)(rng)
                       : config.overlap_conditions[index % config.overlap_conditions.size()];
    const UtteranceRef* target = nullptr;
    const UtteranceRef* interferer = nullptr;
    PlacementPlan plan;
    std::string last_error;
    for (int attempt = 0; attempt < 200 && interferer == nullptr; ++attempt) {
      const UtteranceRef* t = targets[std::uniform_int_distribution<std::size_t>(0, targets.size() - 1)(rng)];
      const UtteranceRef* i = all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
      if (i->speaker == t->speaker) continue;
      try {
        plan = PlanOverlap(t->length, i->length, ratio, config.mode, rng());
      } catch (const DataError& e) {
        last_error = e.what();
        continue;
      }
      target = t;
      interferer = i;
    }
    if (interferer == nullptr)
      throw DataError("record " + std::to_string(index) + ": no feasible utterance pair" +
                      (last_error.empty() ? "" : " (" + last_error + ")"));

    UtteranceRef enroll = PairEnrollment(corpus, *target, config.min_enroll_sec, rng());

    std::optional<double> snr;
    AudioSignal noise;
    fs::path noise_path;
    if (!noises.empty()) {
      snr = std::uniform_real_distribution<double>(config.snr_min, config.snr_max)(rng);
      noise_path = noises[std::uniform_int_distribution<std::size_t>(0, noises.size() - 1)(rng)];
      noise = ReadWav(noise_path);
    }
    const std::uint64_t synth_seed = rng();

    MixtureSample sample = Synthesize(plan, ReadWav(target->path), ReadWav(interferer->path),
                                      noises.empty() ? nullptr : &noise, snr, synth_seed,
                                      !config.no_loop);
    ManifestRecord r;
    r.id = RecordId(static_cast<int>(index));
    r.mixture = "wav/" + r.id + "-mix.wav";
    r.target = "wav/" + r.id + "-tgt.wav";
    r.enrollment = "wav/" + r.id + "-enr.wav";
    WriteWav(config.out_dir / r.mixture, sample.mixture);
    WriteWav(config.out_dir / r.target, sample.target_ref);
    WriteWav(config.out_dir / r.enrollment, ReadWav(enroll.path));
    r.speaker = target->speaker;
    r.interferer_speaker = interferer->speaker;
    r.labels = sample.labels;
    r.snr_db = sample.snr_db;
    r.overlap_ratio = plan.OverlapRatio();
    r.requested_overlap = plan.requested_ratio;
    r.offset_a = plan.offset_a;
    r.offset_b = plan.offset_b;
    r.len_a = plan.len_a;
    r.len_b = plan.len_b;
    r.mixture_len = plan.mixture_len;
    r.mode = plan.mode;
    if (!target->transcript.empty()) r.transcript = target->transcript;
    r.headroom_gain = sample.headroom_gain;
    r.noise_gain = sample.noise_gain;
    r.source_target = RelativeTo(target->path, config.out_dir);
    r.source_interferer = RelativeTo(interferer->path, config.out_dir);
    if (!noise_path.empty()) r.source_noise = RelativeTo(noise_path, config.out_dir);
    r.synth_seed = synth_seed;
    r.loop_noise = !config.no_loop;
    records[index] = std::move(r);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        build_one(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(config.threads, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  WriteManifest(config.out_dir / "manifest.jsonl", records);
  return records;
}

}  // namespace tsb
