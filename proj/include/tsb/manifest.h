// include/tsb/manifest.h

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

#ifndef TSB_MANIFEST_H_
#define TSB_MANIFEST_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tsb/mixture.h"

namespace tsb {

// One JSON Lines record. Paths are stored relative to the manifest directory.
struct ManifestRecord {
  std::string id;
  std::string mixture;
  std::string target;
  std::string enrollment;
  std::string speaker;
  std::string interferer_speaker;
  std::vector<FrameLabel> labels;
  std::optional<double> snr_db;  // nullopt serializes as "clean"
  double overlap_ratio = 0.0;    // realized, overlapped samples / mixture length
  double requested_overlap = 0.0;
  std::size_t offset_a = 0;
  std::size_t offset_b = 0;
  std::size_t len_a = 0;
  std::size_t len_b = 0;
  std::size_t mixture_len = 0;
  MixMode mode = MixMode::kSparse;
  std::optional<std::string> transcript;
  double headroom_gain = 1.0;
  double noise_gain = 0.0;
  // Provenance for re-synthesis; paths relative to the manifest directory
  // when possible. Empty in hand-written manifests.
  std::string source_target;
  std::string source_interferer;
  std::string source_noise;
  std::uint64_t synth_seed = 0;
  bool loop_noise = true;

  PlacementPlan Plan() const;
  bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
  std::filesystem::path base_dir;  // directory relative paths resolve against
  std::vector<ManifestRecord> records;

  std::filesystem::path Resolve(const std::string& rel) const;
};

void WriteManifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

/// Parses and validates a manifest: unique ids, known modes, well-formed
/// labels, and (when `check_files`) every referenced WAV exists.
Manifest ReadManifest(const std::filesystem::path& path, bool check_files = true);

/// Loads the audio of one record. Interferer and noise streams are not stored
/// on disk and stay empty.
MixtureSample LoadSample(const Manifest& manifest, const ManifestRecord& record);

/// Rebuilds every stream of a record (before quantization) from its source
/// utterances. Throws DataError when the record has no provenance.
MixtureSample Resynthesize(const Manifest& manifest, const ManifestRecord& record);

struct SimulationConfig {
  std::filesystem::path corpus_dir;
  std::optional<std::filesystem::path> noise_dir;
  std::filesystem::path out_dir;
  int n_mixtures = 0;
  MixMode mode = MixMode::kSparse;
  double overlap_min = 0.0;
  double overlap_max = 0.4;
  // When non-empty, record i uses overlap_conditions[i % size] instead of a
  // uniform draw from [overlap_min, overlap_max].
  std::vector<double> overlap_conditions;
  double snr_min = 0.0;
  double snr_max = 15.0;
  bool no_loop = false;
  double min_enroll_sec = 0.0;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Generates n_mixtures records into out_dir (wav/ + manifest.jsonl). Each
/// record draws its randomness from DeriveSeed(seed, index) only.
std::vector<ManifestRecord> BuildCorpus(const SimulationConfig& config);

}  // namespace tsb

#endif  // TSB_MANIFEST_H_
