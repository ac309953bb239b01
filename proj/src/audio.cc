// src/audio.cc

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

#include "tsb/audio.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tsb/errors.h"

namespace tsb {

AudioSignal::AudioSignal(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {}

void AudioSignal::Validate(const std::string& what) const {
  if (sample_rate_ <= 0) throw DataError(what + ": sample rate must be positive");
  if (samples_.empty()) throw DataError(what + ": empty signal");
  for (double v : samples_) {
    if (!std::isfinite(v)) throw DataError(what + ": non-finite sample");
  }
}

namespace {

std::uint32_t ReadU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t ReadU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::string* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU16(std::string* out, std::uint16_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>((v >> 8) & 0xff));
}

struct ParsedWav {
  WavInfo info;
  std::streamoff data_offset = 0;
};

ParsedWav ParseHeader(std::istream& is, const std::string& name) {
  std::array<unsigned char, 12> riff{};
  if (!is.read(reinterpret_cast<char*>(riff.data()), riff.size()))
    throw DataError(name + ": file too short for a RIFF header");
  if (std::memcmp(riff.data(), "RIFF", 4) != 0 || std::memcmp(riff.data() + 8, "WAVE", 4) != 0)
    throw DataError(name + ": not a RIFF/WAVE file");

  ParsedWav parsed;
  bool have_fmt = false;
  while (true) {
    std::array<unsigned char, 8> chunk{};
    if (!is.read(reinterpret_cast<char*>(chunk.data()), chunk.size()))
      throw DataError(name + ": no data chunk");
    std::uint32_t size = ReadU32(chunk.data() + 4);
    if (std::memcmp(chunk.data(), "fmt ", 4) == 0) {
      if (size < 16) throw DataError(name + ": fmt chunk too small");
      std::vector<unsigned char> fmt(size);
      if (!is.read(reinterpret_cast<char*>(fmt.data()), size))
        throw DataError(name + ": truncated fmt chunk");
      std::uint16_t format = ReadU16(fmt.data());
      parsed.info.channels = ReadU16(fmt.data() + 2);
      parsed.info.sample_rate = static_cast<int>(ReadU32(fmt.data() + 4));
      parsed.info.bits_per_sample = ReadU16(fmt.data() + 14);
      if (format != 1) throw DataError(name + ": unsupported encoding (only PCM is accepted)");
      if (parsed.info.channels != 1)
        throw DataError(name + ": expected mono, got " + std::to_string(parsed.info.channels) +
                        " channels");
      if (parsed.info.bits_per_sample != 16)
        throw DataError(name + ": expected 16-bit samples, got " +
                        std::to_string(parsed.info.bits_per_sample));
      if (parsed.info.sample_rate != kSampleRate)
        throw DataError(name + ": expected 16000 Hz, got " +
                        std::to_string(parsed.info.sample_rate));
      if (size % 2) is.ignore(1);
      have_fmt = true;
    } else if (std::memcmp(chunk.data(), "data", 4) == 0) {
      if (!have_fmt) throw DataError(name + ": data chunk before fmt chunk");
      parsed.info.num_samples = size / 2;
      parsed.data_offset = is.tellg();
      return parsed;
    } else {
      is.ignore(size + (size % 2));
    }
  }
}

}  // namespace

WavInfo ReadWavInfo(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  return ParseHeader(is, path.string()).info;
}

AudioSignal ReadWav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  ParsedWav parsed = ParseHeader(is, path.string());
  std::vector<char> raw(parsed.info.num_samples * 2);
  if (!is.read(raw.data(), static_cast<std::streamsize>(raw.size())))
    throw DataError(path.string() + ": data chunk truncated");
  std::vector<double> samples(parsed.info.num_samples);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto lo = static_cast<unsigned char>(raw[2 * i]);
    auto hi = static_cast<unsigned char>(raw[2 * i + 1]);
    auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
    samples[i] = v / 32768.0;
  }
  return AudioSignal(std::move(samples), parsed.info.sample_rate);
}

std::int16_t QuantizeSample(double x) {
  double scaled = std::nearbyint(x * 32768.0);
  scaled = std::clamp(scaled, -32768.0, 32767.0);
  return static_cast<std::int16_t>(scaled);
}

AudioSignal Quantize16(const AudioSignal& signal) {
  std::vector<double> out(signal.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = QuantizeSample(signal[i]) / 32768.0;
  return AudioSignal(std::move(out), signal.sample_rate());
}

void WriteWav(const std::filesystem::path& path, const AudioSignal& signal) {
  const auto data_bytes = static_cast<std::uint32_t>(signal.size() * 2);
  std::string buf;
  buf.reserve(44 + data_bytes);
  buf += "RIFF";
  PutU32(&buf, 36 + data_bytes);
  buf += "WAVEfmt ";
  PutU32(&buf, 16);
  PutU16(&buf, 1);
  PutU16(&buf, 1);
  PutU32(&buf, static_cast<std::uint32_t>(signal.sample_rate()));
  PutU32(&buf, static_cast<std::uint32_t>(signal.sample_rate() * 2));
  PutU16(&buf, 2);
  PutU16(&buf, 16);
  buf += "data";
  PutU32(&buf, data_bytes);
  for (double x : signal.samples()) PutU16(&buf, static_cast<std::uint16_t>(QuantizeSample(x)));

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw DataError("write failed for " + path.string());
}

}  // namespace tsb
