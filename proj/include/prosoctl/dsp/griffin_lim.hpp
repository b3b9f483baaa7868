// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "prosoctl/common.hpp"
#include "prosoctl/dsp/mel.hpp"
#include "prosoctl/dsp/stft.hpp"

namespace prosoctl::dsp {

struct GriffinLimResult {
  AudioBuffer audio;
  // convergence[k] = || |STFT(x_k)| - M || / ||M|| for k = 0..n_iters, where
  // x_0 is the inverse STFT of M with the seeded initial phases.
  std::vector<double> convergence;
};

inline double spectral_convergence(const Matrix<double>& estimate,
                                   const Matrix<double>& target) {
  Matrix<double> diff(target.rows(), target.cols());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff.data()[i] = estimate.data()[i] - target.data()[i];
  }
  const double denom = two_sided_norm_sq(target);
  if (denom <= 0.0) return 0.0;
  return std::sqrt(two_sided_norm_sq(diff) / denom);
}

/// Classic Griffin-Lim (no momentum) on a linear magnitude spectrogram.
/// Each step is an exact least-squares inverse STFT followed by a magnitude
/// projection, so the spectral convergence never increases.
inline GriffinLimResult griffin_lim_magnitude(const Matrix<double>& target,
                                              const FrameGrid& grid,
                                              std::size_t n_samples, int sample_rate,
                                              int n_iters, std::uint64_t seed) {
  if (n_iters < 0) throw DataError("griffin_lim: n_iters must be >= 0");
  grid.validate();
  if (target.rows() != grid.n_frames || target.cols() != grid.n_bins()) {
    throw DataError("griffin_lim: magnitude shape does not match frame grid");
  }
  const Fft fft(static_cast<std::size_t>(grid.fft_size));
  const auto window = make_window(grid.window, grid.fft_size);

  Rng rng(derive_seed(seed, "griffin_lim:phase"));
  Spectrogram y(target.rows(), target.cols());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double phase = 2.0 * kPi * rng.uniform();
    y.data()[i] = std::polar(target.data()[i], phase);
  }

  GriffinLimResult result;
  result.audio.sample_rate = sample_rate;
  result.audio.samples = istft_least_squares(y, grid, n_samples, fft, window);
  for (int it = 0;; ++it) {
    const Spectrogram x = detail::stft_samples(result.audio.samples, grid, fft, window);
    result.convergence.push_back(spectral_convergence(magnitude(x), target));
    if (it == n_iters) break;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const std::complex<double> v = x.data()[i];
      const double a = std::abs(v);
      y.data()[i] = a > 0.0 ? target.data()[i] * (v / a) : std::complex<double>(target.data()[i], 0.0);
    }
    result.audio.samples = istft_least_squares(y, grid, n_samples, fft, window);
  }
  return result;
}

inline GriffinLimResult griffin_lim_with_trace(const MelSpectrogram& mel, int n_iters,
                                               std::uint64_t seed) {
  const std::size_t n_samples =
      mel.n_samples ? mel.n_samples : mel.grid.n_frames * static_cast<std::size_t>(mel.grid.hop);
  return griffin_lim_magnitude(mel_to_linear(mel), mel.grid, n_samples, mel.sample_rate,
                               n_iters, seed);
}

inline AudioBuffer griffin_lim(const MelSpectrogram& mel, int n_iters, std::uint64_t seed) {
  return griffin_lim_with_trace(mel, n_iters, seed).audio;
}

}  // namespace prosoctl::dsp
