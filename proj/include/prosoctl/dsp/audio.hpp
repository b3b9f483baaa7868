// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "prosoctl/common.hpp"

namespace prosoctl::dsp {

inline constexpr double kPi = 3.14159265358979323846;

// Analysis defaults shared by every track so that alignment frames, F0
// frames, energy frames and mel frames coincide.
inline constexpr int kDefaultSampleRate = 22050;
inline constexpr int kDefaultFftSize = 1024;
inline constexpr int kDefaultHop = 256;
inline constexpr int kDefaultMels = 80;
inline constexpr double kDefaultFmin = 0.0;
inline constexpr double kDefaultFmax = 8000.0;

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

inline void validate_audio(const AudioBuffer& audio) {
  if (audio.sample_rate <= 0) {
    throw DataError("audio: sample_rate must be positive");
  }
  if (audio.samples.empty()) throw DataError("audio: empty buffer");
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    if (!std::isfinite(audio.samples[i])) {
      throw DataError("audio: non-finite sample at index " +
                      std::to_string(i));
    }
  }
}

enum class Window { hann, rectangular };

inline std::string to_string(Window w) {
  return w == Window::hann ? "hann" : "rectangular";
}

inline Window window_from_string(const std::string& name) {
  if (name == "hann") return Window::hann;
  if (name == "rectangular" || name == "rect") return Window::rectangular;
  throw DataError("unknown window: " + name);
}

// Periodic window of length n.
inline std::vector<double> make_window(Window w, int n) {
  std::vector<double> out(static_cast<std::size_t>(n), 1.0);
  if (w == Window::hann) {
    for (int i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] =
          0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
    }
  }
  return out;
}

/// Frame t owns the hop-sized cell [t*hop, (t+1)*hop) of the signal. Windowed
/// analyses (STFT, NCCF) are centred on the middle of that cell; samples
/// outside the signal read as zero. A signal of L samples has ceil(L/hop)
/// frames, so a phone aligned to frames [a, b] spans exactly (b-a+1)*hop
/// samples.
struct FrameGrid {
  int fft_size = kDefaultFftSize;
  int hop = kDefaultHop;
  Window window = Window::hann;
  std::size_t n_frames = 0;

  static std::size_t frames_for_length(std::size_t n_samples, int hop) {
    return (n_samples + static_cast<std::size_t>(hop) - 1) /
           static_cast<std::size_t>(hop);
  }

  static FrameGrid for_length(std::size_t n_samples, int fft_size = kDefaultFftSize,
                              int hop = kDefaultHop,
                              Window window = Window::hann) {
    FrameGrid g{fft_size, hop, window, frames_for_length(n_samples, hop)};
    g.validate();
    return g;
  }

  std::ptrdiff_t cell_start(std::size_t t) const {
    return static_cast<std::ptrdiff_t>(t) * hop;
  }
  std::ptrdiff_t center(std::size_t t) const {
    return cell_start(t) + hop / 2;
  }
  // First sample covered by the fft_size analysis window of frame t.
  std::ptrdiff_t window_start(std::size_t t) const {
    return center(t) - fft_size / 2;
  }
  std::size_t n_bins() const { return static_cast<std::size_t>(fft_size) / 2 + 1; }

  void validate() const {
    if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0) {
      throw DataError("frame grid: fft_size must be a positive power of two");
    }
    if (hop <= 0 || hop > fft_size) {
      throw DataError("frame grid: hop must be in (0, fft_size]");
    }
  }

  friend bool operator==(const FrameGrid&, const FrameGrid&) = default;
};

inline void check_grid_matches(const AudioBuffer& audio, const FrameGrid& grid) {
  grid.validate();
  const std::size_t expected =
      FrameGrid::frames_for_length(audio.size(), grid.hop);
  if (grid.n_frames != expected) {
    throw DataError("frame grid: n_frames " + std::to_string(grid.n_frames) +
                    " does not match audio length (expected " +
                    std::to_string(expected) + ")");
  }
}

inline double sample_or_zero(const std::vector<double>& x, std::ptrdiff_t i) {
  if (i < 0 || i >= static_cast<std::ptrdiff_t>(x.size())) return 0.0;
  return x[static_cast<std::size_t>(i)];
}

}  // namespace prosoctl::dsp
