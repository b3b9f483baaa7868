// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "prosoctl/dsp/audio.hpp"
#include "prosoctl/dsp/fft.hpp"
#include "prosoctl/matrix.hpp"

namespace prosoctl::dsp {

// n_frames x (fft_size/2 + 1)
using Spectrogram = Matrix<std::complex<double>>;

namespace detail {

inline Spectrogram stft_samples(const std::vector<double>& x, const FrameGrid& grid,
                                const Fft& fft, const std::vector<double>& window) {
  const auto n = static_cast<std::size_t>(grid.fft_size);
  Spectrogram out(grid.n_frames, grid.n_bins());
  std::vector<double> frame(n);
  for (std::size_t t = 0; t < grid.n_frames; ++t) {
    const std::ptrdiff_t start = grid.window_start(t);
    for (std::size_t i = 0; i < n; ++i) {
      frame[i] = window[i] * sample_or_zero(x, start + static_cast<std::ptrdiff_t>(i));
    }
    const auto bins = fft.rfft(frame);
    std::copy(bins.begin(), bins.end(), out.row(t).begin());
  }
  return out;
}

}  // namespace detail

/// Short-time Fourier transform on the shared grid. Frame t is the windowed
/// DFT of the fft_size samples centred on cell t.
inline Spectrogram stft(const AudioBuffer& audio, const FrameGrid& grid) {
  validate_audio(audio);
  check_grid_matches(audio, grid);
  const Fft fft(static_cast<std::size_t>(grid.fft_size));
  return detail::stft_samples(audio.samples, grid, fft,
                              make_window(grid.window, grid.fft_size));
}

inline Matrix<double> magnitude(const Spectrogram& spec) {
  Matrix<double> mag(spec.rows(), spec.cols());
  for (std::size_t i = 0; i < spec.size(); ++i) mag.data()[i] = std::abs(spec.data()[i]);
  return mag;
}

/// Squared norm of a half spectrum measured as the full (two-sided)
/// spectrum: interior bins count twice, DC and Nyquist once.
inline double two_sided_norm_sq(const Matrix<double>& half) {
  const std::size_t last = half.cols() - 1;
  double acc = 0.0;
  for (std::size_t t = 0; t < half.rows(); ++t) {
    for (std::size_t k = 0; k < half.cols(); ++k) {
      const double w = (k == 0 || k == last) ? 1.0 : 2.0;
      acc += w * half(t, k) * half(t, k);
    }
  }
  return acc;
}

/// Least-squares inverse STFT: the n_samples-long real signal whose STFT is
/// closest (two-sided Frobenius norm) to `spec`. Windowed overlap-add divided
/// by the summed squared window.
inline std::vector<double> istft_least_squares(const Spectrogram& spec,
                                               const FrameGrid& grid,
                                               std::size_t n_samples,
                                               const Fft& fft,
                                               const std::vector<double>& window) {
  const auto n = static_cast<std::size_t>(grid.fft_size);
  std::vector<double> acc(n_samples, 0.0);
  std::vector<double> norm(n_samples, 0.0);
  for (std::size_t t = 0; t < spec.rows(); ++t) {
    const auto frame = fft.irfft(spec.row(t));
    const std::ptrdiff_t start = grid.window_start(t);
    for (std::size_t i = 0; i < n; ++i) {
      const std::ptrdiff_t s = start + static_cast<std::ptrdiff_t>(i);
      if (s < 0 || s >= static_cast<std::ptrdiff_t>(n_samples)) continue;
      const auto idx = static_cast<std::size_t>(s);
      acc[idx] += window[i] * frame[i];
      norm[idx] += window[i] * window[i];
    }
  }
  for (std::size_t i = 0; i < n_samples; ++i) {
    acc[i] = norm[i] > 1e-12 ? acc[i] / norm[i] : 0.0;
  }
  return acc;
}

inline std::vector<double> istft_least_squares(const Spectrogram& spec,
                                               const FrameGrid& grid,
                                               std::size_t n_samples) {
  const Fft fft(static_cast<std::size_t>(grid.fft_size));
  return istft_least_squares(spec, grid, n_samples, fft,
                             make_window(grid.window, grid.fft_size));
}

}  // namespace prosoctl::dsp
