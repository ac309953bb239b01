// include/tsb/checkpoint.h

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

#ifndef TSB_CHECKPOINT_H_
#define TSB_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsb/tensor.h"

namespace tsb {

// Binary container:
//   "TSCK", u32 version, u64 meta length, meta JSON (UTF-8),
//   u32 tensor count, then per tensor
//     u32 name length, name, u8 dtype (0 float32, 1 float64), u32 rows, u32 cols,
//     rows * cols little-endian values (row-major),
//   u64 FNV-1a hash of every preceding byte.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class TensorDtype : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

struct NamedTensor {
  std::string name;
  Mat value;
  TensorDtype dtype = TensorDtype::kFloat64;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;
  std::uint64_t content_hash = 0;  // set by SaveCheckpoint / LoadCheckpoint

  const NamedTensor* Find(const std::string& name) const;
  // Throws DataError naming the tensor.
  const NamedTensor& Get(const std::string& name) const;
};

// Returns the content hash written at the end of the file.
std::uint64_t SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

// Hex rendering of a 64-bit hash.
std::string HexHash(std::uint64_t h);

}  // namespace tsb

#endif  // TSB_CHECKPOINT_H_
