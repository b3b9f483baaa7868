// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace prosoctl::dsp {

/// Iterative radix-2 FFT for one power-of-two size. Holds only immutable
/// tables, so a single instance may be shared across threads.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n), bitrev_(n), twiddle_(n / 2) {
    if (n == 0 || (n & (n - 1)) != 0) {
      throw std::invalid_argument("Fft: size must be a power of two");
    }
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) {
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      }
      bitrev_[i] = r;
    }
    const double pi = 3.14159265358979323846;
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = {std::cos(a), std::sin(a)};
    }
  }

  std::size_t size() const { return n_; }

  // In-place forward transform (unnormalised).
  void forward(std::span<std::complex<double>> x) const { transform(x, false); }

  // In-place inverse transform, scaled by 1/n.
  void inverse(std::span<std::complex<double>> x) const {
    transform(x, true);
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& v : x) v *= scale;
  }

  // Real input of length n -> bins 0..n/2.
  std::vector<std::complex<double>> rfft(std::span<const double> frame) const {
    std::vector<std::complex<double>> buf(n_);
    for (std::size_t i = 0; i < n_; ++i) buf[i] = frame[i];
    forward(buf);
    buf.resize(n_ / 2 + 1);
    return buf;
  }

  // Bins 0..n/2 -> real signal of length n, assuming Hermitian symmetry.
  // Imaginary parts of the DC and Nyquist bins are ignored.
  std::vector<double> irfft(std::span<const std::complex<double>> bins) const {
    std::vector<std::complex<double>> buf(n_);
    const std::size_t half = n_ / 2;
    buf[0] = bins[0].real();
    buf[half] = bins[half].real();
    for (std::size_t k = 1; k < half; ++k) {
      buf[k] = bins[k];
      buf[n_ - k] = std::conj(bins[k]);
    }
    inverse(buf);
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = buf[i].real();
    return out;
  }

 private:
  void transform(std::span<std::complex<double>> x, bool inverse) const {
    if (x.size() != n_) throw std::invalid_argument("Fft: size mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
      if (i < bitrev_[i]) std::swap(x[i], x[bitrev_[i]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t step = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          std::complex<double> w = twiddle_[k * step];
          if (inverse) w = std::conj(w);
          const std::complex<double> u = x[start + k];
          const std::complex<double> v = x[start + k + half] * w;
          x[start + k] = u + v;
          x[start + k + half] = u - v;
        }
      }
    }
  }

  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<double>> twiddle_;
};

}  // namespace prosoctl::dsp
