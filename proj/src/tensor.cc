// src/tensor.cc

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

#include "tsb/tensor.h"

#include <random>

#include "tsb/errors.h"

namespace tsb {

std::uint64_t Fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

ParamId ParamStore::Add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (index_.count(name)) throw UsageError("duplicate parameter name '" + name + "'");
  entries_.push_back(Entry{name, Mat::Zero(rows, cols), true});
  index_[name] = entries_.size() - 1;
  return ParamId{entries_.size() - 1};
}

std::optional<ParamId> ParamStore::Find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return ParamId{it->second};
}

ParamId ParamStore::Get(const std::string& name) const {
  auto id = Find(name);
  if (!id) throw DataError("missing tensor '" + name + "'");
  return *id;
}

void ParamStore::SetTrainable(std::string_view prefix, bool trainable) {
  for (auto& e : entries_) {
    if (e.name.starts_with(prefix)) e.trainable = trainable;
  }
}

std::uint64_t ParamStore::Checksum(std::string_view prefix) const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& e : entries_) {
    if (!e.name.starts_with(prefix)) continue;
    h = Fnv1a(e.name.data(), e.name.size(), h);
    const Eigen::Index shape[2] = {e.value.rows(), e.value.cols()};
    h = Fnv1a(shape, sizeof(shape), h);
    h = Fnv1a(e.value.data(), sizeof(Real) * static_cast<std::size_t>(e.value.size()), h);
  }
  return h;
}

std::size_t ParamStore::NumScalars(std::string_view prefix) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.name.starts_with(prefix)) n += static_cast<std::size_t>(e.value.size());
  }
  return n;
}

Grads::Grads(const ParamStore& store) {
  tensors_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Mat& v = store[ParamId{i}];
    tensors_.push_back(Mat::Zero(v.rows(), v.cols()));
  }
}

void Grads::SetZero() {
  for (auto& t : tensors_) t.setZero();
}

void Grads::Add(const Grads& other) {
  for (std::size_t i = 0; i < tensors_.size(); ++i) tensors_[i] += other.tensors_[i];
}

void Grads::Scale(Real factor) {
  for (auto& t : tensors_) t *= factor;
}

Real Grads::SquaredNorm() const {
  Real acc = 0.0;
  for (const auto& t : tensors_) acc += t.squaredNorm();
  return acc;
}

void InitUniform(Mat* m, Real bound, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = dist(rng);
}

void InitOrthogonal(Mat* m, Real gain, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> dist(0.0, 1.0);
  const Eigen::Index rows = m->rows(), cols = m->cols();
  const bool tall = rows >= cols;
  Eigen::MatrixXd g(tall ? rows : cols, tall ? cols : rows);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = dist(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  // Fix the sign ambiguity of QR so the result is a deterministic function of g.
  Eigen::MatrixXd r = qr.matrixQR().topRows(g.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  if (tall) *m = gain * q;
  else *m = gain * q.transpose();
}

}  // namespace tsb
