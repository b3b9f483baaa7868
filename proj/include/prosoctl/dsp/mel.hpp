// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "prosoctl/dsp/audio.hpp"
#include "prosoctl/dsp/stft.hpp"
#include "prosoctl/matrix.hpp"

namespace prosoctl::dsp {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular filters with unit peak, centres equally spaced on the HTK mel
/// scale between fmin and fmax.
struct MelFilterbank {
  int n_mels = kDefaultMels;
  double fmin = kDefaultFmin;
  double fmax = kDefaultFmax;
  int sample_rate = kDefaultSampleRate;
  int fft_size = kDefaultFftSize;
  std::vector<double> centers_hz;
  Matrix<double> weights;  // n_mels x n_bins

  static MelFilterbank make(int sample_rate, int fft_size, int n_mels, double fmin,
                            double fmax) {
    if (n_mels <= 0) throw DataError("mel: n_mels must be positive");
    if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
      throw DataError("mel: band edges must satisfy 0 <= fmin < fmax <= sample_rate/2");
    }
    MelFilterbank fb;
    fb.n_mels = n_mels;
    fb.fmin = fmin;
    fb.fmax = fmax;
    fb.sample_rate = sample_rate;
    fb.fft_size = fft_size;
    const auto n_bins = static_cast<std::size_t>(fft_size / 2 + 1);
    const double mlo = hz_to_mel(fmin);
    const double mhi = hz_to_mel(fmax);
    std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      edges[i] = mel_to_hz(mlo + (mhi - mlo) * static_cast<double>(i) /
                                     static_cast<double>(n_mels + 1));
    }
    fb.centers_hz.assign(edges.begin() + 1, edges.end() - 1);
    fb.weights = Matrix<double>(static_cast<std::size_t>(n_mels), n_bins);
    const double bin_hz = static_cast<double>(sample_rate) / fft_size;
    for (std::size_t m = 0; m < static_cast<std::size_t>(n_mels); ++m) {
      const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
      for (std::size_t k = 0; k < n_bins; ++k) {
        const double f = static_cast<double>(k) * bin_hz;
        double w = 0.0;
        if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
        else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
        fb.weights(m, k) = w;
      }
    }
    return fb;
  }

  // n_bins x n_mels map from mel frames back to linear magnitude:
  // W^T (W W^T + lambda I)^-1, with a small ridge for filters that catch
  // few or no FFT bins.
  Matrix<double> pseudo_inverse() const {
    const auto rows = static_cast<Eigen::Index>(weights.rows());
    const auto cols = static_cast<Eigen::Index>(weights.cols());
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        w(r, c) = weights(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    Eigen::MatrixXd gram = w * w.transpose();
    const double ridge = 1e-6 * gram.diagonal().maxCoeff();
    gram.diagonal().array() += ridge;
    const Eigen::MatrixXd pinv =
        w.transpose() * gram.llt().solve(Eigen::MatrixXd::Identity(rows, rows));
    Matrix<double> out(static_cast<std::size_t>(cols), static_cast<std::size_t>(rows));
    for (Eigen::Index r = 0; r < cols; ++r)
      for (Eigen::Index c = 0; c < rows; ++c)
        out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = pinv(r, c);
    return out;
  }
};

struct MelSpectrogram {
  Matrix<double> frames;  // n_frames x n_mels, magnitude-domain
  FrameGrid grid;
  int n_mels = kDefaultMels;
  double fmin = kDefaultFmin;
  double fmax = kDefaultFmax;
  int sample_rate = kDefaultSampleRate;
  std::size_t n_samples = 0;
};

inline Matrix<double> apply_filterbank(const MelFilterbank& fb, const Matrix<double>& mag) {
  Matrix<double> out(mag.rows(), static_cast<std::size_t>(fb.n_mels));
  for (std::size_t t = 0; t < mag.rows(); ++t) {
    for (std::size_t m = 0; m < out.cols(); ++m) {
      double acc = 0.0;
      for (std::size_t k = 0; k < mag.cols(); ++k) acc += fb.weights(m, k) * mag(t, k);
      out(t, m) = std::max(0.0, acc);
    }
  }
  return out;
}

inline MelSpectrogram mel_spectrogram(const AudioBuffer& audio, const FrameGrid& grid,
                                      int n_mels = kDefaultMels,
                                      double fmin = kDefaultFmin,
                                      double fmax = kDefaultFmax) {
  const auto fb = MelFilterbank::make(audio.sample_rate, grid.fft_size, n_mels, fmin, fmax);
  const auto mag = magnitude(stft(audio, grid));
  return MelSpectrogram{apply_filterbank(fb, mag), grid, n_mels, fmin, fmax,
                        audio.sample_rate, audio.size()};
}

/// Linear magnitude estimate from mel frames; negative values clamp to 0.
inline Matrix<double> mel_to_linear(const MelSpectrogram& mel) {
  const auto fb = MelFilterbank::make(mel.sample_rate, mel.grid.fft_size, mel.n_mels,
                                      mel.fmin, mel.fmax);
  const auto pinv = fb.pseudo_inverse();
  Matrix<double> out(mel.frames.rows(), pinv.rows());
  for (std::size_t t = 0; t < out.rows(); ++t) {
    for (std::size_t k = 0; k < out.cols(); ++k) {
      double acc = 0.0;
      for (std::size_t m = 0; m < pinv.cols(); ++m) acc += pinv(k, m) * mel.frames(t, m);
      out(t, k) = std::max(0.0, acc);
    }
  }
  return out;
}

}  // namespace prosoctl::dsp
