// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "prosoctl/common.hpp"
#include "prosoctl/dsp/audio.hpp"

namespace prosoctl::dsp {

// RIFF/WAVE, PCM, 16-bit signed little-endian, mono. Samples map to [-1, 1)
// by division by 32768.

namespace detail {

inline std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace detail

inline std::int16_t quantize_sample(double x) {
  const double scaled = std::round(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

inline std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio) {
  if (audio.sample_rate <= 0) throw DataError("wav: sample_rate must be positive");
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  const std::uint32_t data_bytes = n * 2;
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  for (char c : std::string("RIFF")) out.push_back(static_cast<std::uint8_t>(c));
  detail::put_u32(out, 36 + data_bytes);
  for (char c : std::string("WAVEfmt ")) out.push_back(static_cast<std::uint8_t>(c));
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  for (char c : std::string("data")) out.push_back(static_cast<std::uint8_t>(c));
  detail::put_u32(out, data_bytes);
  for (double x : audio.samples) {
    detail::put_u16(out, static_cast<std::uint16_t>(quantize_sample(x)));
  }
  return out;
}

inline AudioBuffer decode_wav(const std::vector<std::uint8_t>& bytes) {
  const auto fail = [](const std::string& what) { throw DataError("wav: " + what); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0) {
    fail("missing RIFF header");
  }
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) fail("RIFF form type is not WAVE");
  std::size_t pos = 12;
  bool have_fmt = false;
  AudioBuffer audio;
  while (pos + 8 <= bytes.size()) {
    const std::string id(reinterpret_cast<const char*>(bytes.data() + pos), 4);
    const std::uint32_t size = detail::read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) fail("chunk '" + id + "' overruns file");
    if (id == "fmt ") {
      if (size < 16) fail("fmt chunk too short");
      const std::uint8_t* p = bytes.data() + body;
      const std::uint16_t format = detail::read_u16(p);
      const std::uint16_t channels = detail::read_u16(p + 2);
      const std::uint32_t rate = detail::read_u32(p + 4);
      const std::uint16_t bits = detail::read_u16(p + 14);
      if (format != 1) fail("audio_format is " + std::to_string(format) + ", expected 1 (PCM)");
      if (channels != 1) fail("num_channels is " + std::to_string(channels) + ", expected 1 (mono)");
      if (bits != 16) fail("bits_per_sample is " + std::to_string(bits) + ", expected 16");
      if (rate == 0) fail("sample_rate is 0");
      audio.sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) fail("data chunk before fmt chunk");
      if (size % 2 != 0) fail("data chunk size is not a multiple of 2");
      audio.samples.resize(size / 2);
      for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(detail::read_u16(bytes.data() + body + 2 * i));
        audio.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      return audio;
    }
    pos = body + size + (size & 1u);
  }
  fail(have_fmt ? "missing data chunk" : "missing fmt chunk");
  return audio;
}

inline AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("wav: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + " (" + path + ")");
  }
}

inline void write_wav(const std::string& path, const AudioBuffer& audio) {
  const auto bytes = encode_wav(audio);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("wav: cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace prosoctl::dsp
