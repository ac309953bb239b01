// include/tsb/tensor.h

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

#ifndef TSB_TENSOR_H_
#define TSB_TENSOR_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace tsb {

using Real = double;
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<Real, 1, Eigen::Dynamic>;

// Upstream representations: (L + 1) layers of T x D frames, 320 samples per
// frame. Layer 0 is the convolutional front-end output.
struct LayerStack {
  std::vector<Mat> layers;
  int stride = 320;

  int NumLayers() const { return static_cast<int>(layers.size()); }
  Eigen::Index Frames() const { return layers.empty() ? 0 : layers[0].rows(); }
  Eigen::Index Dim() const { return layers.empty() ? 0 : layers[0].cols(); }
};

struct ParamId {
  std::size_t index = static_cast<std::size_t>(-1);
  bool valid() const { return index != static_cast<std::size_t>(-1); }
};

// Named parameter tensors. Modules register their tensors here and keep only
// ids, so that forward/backward passes are const over the model and any
// number of workers can accumulate into private Grads.
class ParamStore {
 public:
  ParamId Add(const std::string& name, Eigen::Index rows, Eigen::Index cols);

  Mat& operator[](ParamId id) { return entries_[id.index].value; }
  const Mat& operator[](ParamId id) const { return entries_[id.index].value; }

  std::optional<ParamId> Find(const std::string& name) const;
  // Throws DataError naming the tensor when it does not exist.
  ParamId Get(const std::string& name) const;
  const std::string& Name(ParamId id) const { return entries_[id.index].name; }
  std::size_t size() const { return entries_.size(); }
  ParamId At(std::size_t i) const { return ParamId{i}; }

  bool Trainable(ParamId id) const { return entries_[id.index].trainable; }
  void SetTrainable(std::string_view prefix, bool trainable);

  // FNV-1a over names, shapes and raw bytes of every tensor whose name starts
  // with `prefix`.
  std::uint64_t Checksum(std::string_view prefix = "") const;
  std::size_t NumScalars(std::string_view prefix = "") const;

 private:
  struct Entry {
    std::string name;
    Mat value;
    bool trainable = true;
  };
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

class Grads {
 public:
  Grads() = default;
  explicit Grads(const ParamStore& store);

  Mat& operator[](ParamId id) { return tensors_[id.index]; }
  const Mat& operator[](ParamId id) const { return tensors_[id.index]; }
  std::size_t size() const { return tensors_.size(); }

  void SetZero();
  void Add(const Grads& other);
  void Scale(Real factor);
  Real SquaredNorm() const;

 private:
  std::vector<Mat> tensors_;
};

void InitUniform(Mat* m, Real bound, std::uint64_t seed);
// Gaussian matrix orthogonalized with QR (rows or columns, whichever is the
// smaller set), scaled by `gain`.
void InitOrthogonal(Mat* m, Real gain, std::uint64_t seed);

std::uint64_t Fnv1a(const void* data, std::size_t size, std::uint64_t h = 14695981039346656037ULL);

}  // namespace tsb

#endif  // TSB_TENSOR_H_
