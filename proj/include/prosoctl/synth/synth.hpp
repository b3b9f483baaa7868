// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "prosoctl/common.hpp"
#include "prosoctl/corpus/alignment.hpp"
#include "prosoctl/dsp/mel.hpp"
#include "prosoctl/dsp/wav.hpp"
#include "prosoctl/features/vector.hpp"
#include "prosoctl/synth/timbre.hpp"

namespace prosoctl::synth {

using corpus::PhoneToken;
using corpus::Utterance;

struct SynthConfig {
  int sample_rate = dsp::kDefaultSampleRate;
  int hop = dsp::kDefaultHop;
  TimbreTable timbre = builtin_timbres();
  double crossfade_ms = 4.0;
  std::uint64_t seed = 0;
  // Voiced F0 is clamped to this range, which should match the analysis.
  double f0_min = 60.0;
  double f0_max = 400.0;
  int max_harmonics = 8;
  // Relative tolerance of the per-phone energy solve.
  double gain_tolerance = 1e-6;
  int max_gain_iterations = 60;
};

struct SynthWarning {
  std::size_t phone_index = 0;
  std::string message;
  friend bool operator==(const SynthWarning&, const SynthWarning&) = default;
};

struct Rendition {
  dsp::AudioBuffer audio;
  Utterance alignment;  // realized spans on the hop grid
  std::vector<AcousticFeatureVector> features;  // raw values actually rendered
  std::vector<SynthWarning> warnings;
};

inline void validate_synth_config(const SynthConfig& cfg) {
  if (cfg.sample_rate <= 0 || cfg.hop <= 0) throw UsageError("synth: sample_rate and hop must be > 0");
  if (!(cfg.crossfade_ms >= 0.0)) throw UsageError("synth: crossfade_ms must be >= 0");
  if (!(cfg.f0_min > 0.0 && cfg.f0_min < cfg.f0_max)) throw UsageError("synth: need 0 < f0_min < f0_max");
  if (cfg.max_harmonics < 1) throw UsageError("synth: max_harmonics must be >= 1");
}

namespace detail {

// Relative harmonic amplitude at frequency hz for a formant envelope.
inline double envelope(const Timbre& t, double hz) {
  double e = 0.3;
  for (const auto& f : t.formants) {
    const double x = (hz - f.center_hz) / (0.5 * f.bandwidth_hz);
    e += f.gain / (1.0 + x * x);
  }
  return e;
}

struct PhonePlan {
  std::size_t token = 0;
  const Timbre* timbre = nullptr;
  std::size_t frames = 0;
  std::size_t start = 0;  // sample
  std::size_t end = 0;    // sample, exclusive
  double f0 = 0.0;
  double energy = 0.0;
};

inline std::vector<double> resonated_noise(const Timbre& t, std::size_t n, int sr,
                                           std::uint64_t seed) {
  constexpr std::size_t kPreroll = 512;
  Rng rng(seed);
  std::vector<double> noise(n + kPreroll);
  for (double& v : noise) v = rng.normal();
  std::vector<double> out(n, 0.0);
  for (const auto& f : t.formants) {
    const double r = std::exp(-dsp::kPi * f.bandwidth_hz / sr);
    const double a1 = 2.0 * r * std::cos(2.0 * dsp::kPi * f.center_hz / sr);
    const double a2 = -r * r;
    double y1 = 0.0, y2 = 0.0;
    for (std::size_t i = 0; i < noise.size(); ++i) {
      const double y = (1.0 - r) * noise[i] + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      if (i >= kPreroll) out[i - kPreroll] += f.gain * y;
    }
  }
  return out;
}

inline std::vector<double> cell_rms(const std::vector<double>& y, std::size_t hop) {
  std::vector<double> out(y.size() / hop);
  for (std::size_t t = 0; t < out.size(); ++t) {
    double acc = 0.0;
    for (std::size_t i = t * hop; i < (t + 1) * hop; ++i) acc += y[i] * y[i];
    out[t] = std::sqrt(acc / static_cast<double>(hop));
  }
  return out;
}

}  // namespace detail

/// Renders per-phone raw features. Each phone lasts round(duration) frames
/// of `hop` samples; boundary tokens take no time.
inline Rendition synthesize(const Utterance& utt, const std::vector<AcousticFeatureVector>& raw,
                            const SynthConfig& cfg) {
  validate_synth_config(cfg);
  if (raw.size() != utt.phones.size())
    throw DataError("synth: " + std::to_string(raw.size()) + " feature vectors for " +
                    std::to_string(utt.phones.size()) + " tokens");
  Rendition out;
  out.alignment = utt;
  out.alignment.sample_rate = cfg.sample_rate;
  out.alignment.hop = cfg.hop;
  out.features.assign(raw.size(), AcousticFeatureVector{});
  const auto hop = static_cast<std::size_t>(cfg.hop);
  const auto warn = [&](std::size_t i, const std::string& msg) {
    out.warnings.push_back({i, msg});
  };

  std::vector<detail::PhonePlan> plan;
  std::size_t frame = 0;
  for (std::size_t i = 0; i < utt.phones.size(); ++i) {
    auto& tok = out.alignment.phones[i];
    tok.span.reset();
    if (raw[i].space != FeatureSpace::raw) throw DataError("synth: features must be raw");
    if (tok.is_boundary()) continue;
    const auto& v = raw[i];
    if (!std::isfinite(v.f0) || !std::isfinite(v.energy) || !std::isfinite(v.duration))
      throw DataError("synth: non-finite feature at token " + std::to_string(i));
    detail::PhonePlan p;
    p.token = i;
    p.timbre = &cfg.timbre.at(tok.symbol);
    long long d = std::llround(v.duration);
    if (d < 1) {
      warn(i, "duration " + std::to_string(v.duration) + " clamped to 1 frame");
      d = 1;
    }
    p.frames = static_cast<std::size_t>(d);
    p.energy = v.energy;
    if (p.energy < 0.0) {
      warn(i, "negative energy clamped to 0");
      p.energy = 0.0;
    }
    if (p.timbre->voiced) {
      p.f0 = std::clamp(v.f0, cfg.f0_min, cfg.f0_max);
      if (p.f0 != v.f0) warn(i, "f0 " + std::to_string(v.f0) + " clamped to " + std::to_string(p.f0));
    }
    p.start = frame * hop;
    frame += p.frames;
    p.end = frame * hop;
    tok.span = corpus::AlignmentSpan{p.start / hop, p.end / hop - 1};
    out.features[i] = {p.f0, p.energy, static_cast<double>(p.frames)};
    plan.push_back(p);
  }
  if (plan.empty()) throw DataError("synth: utterance has no phones to render");

  const std::size_t n = frame * hop;
  const int sr = cfg.sample_rate;
  const std::size_t half = std::min<std::size_t>(
      static_cast<std::size_t>(std::lround(cfg.crossfade_ms * sr / 2000.0)), hop / 2);

  // Per-sample F0 driving one global phase accumulator. Unvoiced stretches
  // hold the nearest voiced value; joins between voiced phones ramp
  // linearly across the crossfade.
  std::vector<double> f0_at(n, 0.0);
  {
    double fill = 0.0;
    for (const auto& p : plan)
      if (p.timbre->voiced) {
        fill = p.f0;
        break;
      }
    for (const auto& p : plan) {
      if (p.timbre->voiced) fill = p.f0;
      std::fill(f0_at.begin() + static_cast<std::ptrdiff_t>(p.start),
                f0_at.begin() + static_cast<std::ptrdiff_t>(p.end), fill);
    }
    for (std::size_t k = 1; k < plan.size() && half > 0; ++k) {
      const auto& a = plan[k - 1];
      const auto& b = plan[k];
      if (!a.timbre->voiced || !b.timbre->voiced) continue;
      for (std::size_t j = 0; j < 2 * half; ++j) {
        const std::size_t idx = b.start - half + j;
        const double w = (static_cast<double>(j) + 0.5) / static_cast<double>(2 * half);
        f0_at[idx] = (1.0 - w) * a.f0 + w * b.f0;
      }
    }
  }
  std::vector<double> phase(n, 0.0);
  {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += 2.0 * dsp::kPi * f0_at[i] / sr;
      if (acc > 2.0 * dsp::kPi * 1e6) acc = std::fmod(acc, 2.0 * dsp::kPi);
      phase[i] = acc;
    }
  }

  // Weighted, unit-RMS source of each phone over its extended region.
  struct Contribution {
    std::size_t begin = 0;
    std::vector<double> values;
  };
  std::vector<Contribution> parts(plan.size());
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const auto& p = plan[k];
    const bool left = k > 0 && half > 0;
    const bool right = k + 1 < plan.size() && half > 0;
    const std::size_t begin = left ? p.start - half : p.start;
    const std::size_t end = right ? p.end + half : p.end;
    std::vector<double> src(end - begin, 0.0);
    if (p.timbre->voiced) {
      const double top = std::min(cfg.max_harmonics * p.f0, 0.45 * sr);
      const int harmonics = std::max(1, static_cast<int>(std::floor(top / p.f0)));
      std::vector<double> amp(static_cast<std::size_t>(harmonics));
      for (int h = 1; h <= harmonics; ++h)
        amp[static_cast<std::size_t>(h - 1)] = detail::envelope(*p.timbre, h * p.f0) / h;
      for (std::size_t i = begin; i < end; ++i) {
        double s = 0.0;
        for (int h = 1; h <= harmonics; ++h) s += amp[static_cast<std::size_t>(h - 1)] * std::sin(h * phase[i]);
        src[i - begin] = s;
      }
    } else {
      src = detail::resonated_noise(*p.timbre, end - begin, sr,
                                    derive_seed(cfg.seed, "synth:noise:" + std::to_string(p.token)));
    }
    double sq = 0.0;
    for (std::size_t i = p.start; i < p.end; ++i) sq += src[i - begin] * src[i - begin];
    const double rms = std::sqrt(sq / static_cast<double>(p.end - p.start));
    const double norm = rms > 0.0 ? 1.0 / rms : 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      double w = 1.0;
      if (left && i < p.start + half)
        w = (static_cast<double>(i - begin) + 0.5) / static_cast<double>(2 * half);
      if (right && i >= p.end - half)
        w = (static_cast<double>(end - i) - 0.5) / static_cast<double>(2 * half);
      src[i - begin] *= w * norm;
    }
    parts[k] = {begin, std::move(src)};
  }

  // Solve per-phone gains so the mean cell RMS over each phone hits its
  // target energy.
  std::vector<double> gain(plan.size());
  for (std::size_t k = 0; k < plan.size(); ++k) gain[k] = plan[k].energy;
  std::vector<double> y(n);
  std::vector<double> measured(plan.size());
  const auto render = [&] {
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t k = 0; k < plan.size(); ++k) {
      const auto& c = parts[k];
      for (std::size_t j = 0; j < c.values.size(); ++j) y[c.begin + j] += gain[k] * c.values[j];
    }
    const auto cells = detail::cell_rms(y, hop);
    for (std::size_t k = 0; k < plan.size(); ++k) {
      double s = 0.0;
      for (std::size_t t = plan[k].start / hop; t < plan[k].end / hop; ++t) s += cells[t];
      measured[k] = s / static_cast<double>(plan[k].frames);
    }
  };
  bool converged = false;
  for (int iter = 0; iter < cfg.max_gain_iterations; ++iter) {
    render();
    converged = true;
    for (std::size_t k = 0; k < plan.size(); ++k) {
      const double target = plan[k].energy;
      if (target == 0.0) {
        gain[k] = 0.0;
        continue;
      }
      if (std::abs(measured[k] - target) > cfg.gain_tolerance * target) converged = false;
      if (measured[k] > 0.0) gain[k] *= target / measured[k];
    }
    if (converged) break;
  }
  render();
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const double target = plan[k].energy;
    const double err = target > 0.0 ? std::abs(measured[k] - target) / target : measured[k];
    if (err > 0.01)
      warn(plan[k].token, "energy target " + std::to_string(target) + " unreachable, measured " +
                              std::to_string(measured[k]));
  }
  out.audio = dsp::AudioBuffer{std::move(y), sr};
  return out;
}

/// Mel spectrogram of a rendition on the rendition's hop.
inline dsp::MelSpectrogram render_mel(const Rendition& r, int fft_size = dsp::kDefaultFftSize,
                                      int n_mels = dsp::kDefaultMels,
                                      double fmin = dsp::kDefaultFmin,
                                      double fmax = dsp::kDefaultFmax) {
  const auto grid = dsp::FrameGrid::for_length(r.audio.size(), fft_size, r.alignment.hop);
  return dsp::mel_spectrogram(r.audio, grid, n_mels, fmin, fmax);
}

/// Writes <stem>.wav and <stem>.json (realized alignment).
inline void export_rendition(const Rendition& r, const std::string& stem) {
  const std::filesystem::path wav = stem + ".wav";
  Utterance aligned = r.alignment;
  aligned.audio_path = wav.filename().string();
  dsp::write_wav(wav.string(), r.audio);
  corpus::save_alignment(stem + ".json", aligned);
}

}  // namespace prosoctl::synth
