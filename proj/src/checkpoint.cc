// src/checkpoint.cc

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

#include "tsb/checkpoint.h"

#include <cstring>
#include <fstream>
#include <iterator>

#include "tsb/errors.h"

namespace tsb {

namespace {

class Writer {
 public:
  void Bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename T>
  void Uint(T v) {
    for (std::size_t k = 0; k < sizeof(T); ++k) buf_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  std::vector<unsigned char>& buffer() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& buf, std::size_t end, std::string path)
      : buf_(buf), end_(end), path_(std::move(path)) {}
  const unsigned char* Bytes(std::size_t n, const char* what) {
    if (pos_ + n > end_) throw DataError(path_ + ": truncated " + what);
    const unsigned char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T Uint(const char* what) {
    const unsigned char* p = Bytes(sizeof(T), what);
    T v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(p[k]) << (8 * k);
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<unsigned char>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
  std::string path_;
};

}  // namespace

std::string HexHash(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[i] = digits[h & 15];
  return s;
}

const NamedTensor* Checkpoint::Find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedTensor& Checkpoint::Get(const std::string& name) const {
  const NamedTensor* t = Find(name);
  if (t == nullptr) throw DataError("checkpoint is missing tensor '" + name + "'");
  return *t;
}

std::uint64_t SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.Bytes("TSCK", 4);
  w.Uint<std::uint32_t>(kCheckpointVersion);
  const std::string meta = ckpt.meta.dump();
  w.Uint<std::uint64_t>(meta.size());
  w.Bytes(meta.data(), meta.size());
  w.Uint<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.Uint<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
    w.Bytes(t.name.data(), t.name.size());
    w.Uint<std::uint8_t>(static_cast<std::uint8_t>(t.dtype));
    w.Uint<std::uint32_t>(static_cast<std::uint32_t>(t.value.rows()));
    w.Uint<std::uint32_t>(static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      if (t.dtype == TensorDtype::kFloat32) {
        const float f = static_cast<float>(t.value.data()[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        w.Uint(bits);
      } else {
        std::uint64_t bits;
        std::memcpy(&bits, &t.value.data()[i], 8);
        w.Uint(bits);
      }
    }
  }
  const std::uint64_t hash = Fnv1a(w.buffer().data(), w.buffer().size());
  w.Uint(hash);

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot open " + tmp.string() + " for writing");
    os.write(reinterpret_cast<const char*>(w.buffer().data()),
             static_cast<std::streamsize>(w.buffer().size()));
    if (!os) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
  return hash;
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (buf.size() < 4 + 4 + 8 + 4 + 8) throw DataError(name + ": file too short for a checkpoint");
  if (std::memcmp(buf.data(), "TSCK", 4) != 0) throw DataError(name + ": bad magic (expected \"TSCK\")");

  const std::size_t body = buf.size() - 8;
  std::uint64_t stored = 0;
  for (int k = 0; k < 8; ++k) stored |= static_cast<std::uint64_t>(buf[body + k]) << (8 * k);
  if (Fnv1a(buf.data(), body) != stored) throw DataError(name + ": content hash mismatch");

  Reader r(buf, body, name);
  r.Bytes(4, "magic");
  const auto version = r.Uint<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw DataError(name + ": unsupported checkpoint version " + std::to_string(version));
  const auto meta_len = r.Uint<std::uint64_t>("meta length");
  const unsigned char* meta = r.Bytes(meta_len, "meta");
  Checkpoint ckpt;
  ckpt.content_hash = stored;
  try {
    ckpt.meta = nlohmann::json::parse(meta, meta + meta_len);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(name + ": bad meta JSON: " + e.what());
  }
  const auto count = r.Uint<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto len = r.Uint<std::uint32_t>("tensor name length");
    const unsigned char* p = r.Bytes(len, "tensor name");
    t.name.assign(reinterpret_cast<const char*>(p), len);
    const auto dtype = r.Uint<std::uint8_t>("dtype");
    if (dtype > 1) throw DataError(name + ": tensor '" + t.name + "' has unknown dtype");
    t.dtype = static_cast<TensorDtype>(dtype);
    const auto rows = r.Uint<std::uint32_t>("rows");
    const auto cols = r.Uint<std::uint32_t>("cols");
    t.value.resize(rows, cols);
    for (Eigen::Index k = 0; k < t.value.size(); ++k) {
      if (t.dtype == TensorDtype::kFloat32) {
        const auto bits = r.Uint<std::uint32_t>("payload");
        float f;
        std::memcpy(&f, &bits, 4);
        t.value.data()[k] = f;
      } else {
        const auto bits = r.Uint<std::uint64_t>("payload");
        std::memcpy(&t.value.data()[k], &bits, 8);
      }
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.pos() != body) throw DataError(name + ": trailing bytes before content hash");
  return ckpt;
}

}  // namespace tsb
