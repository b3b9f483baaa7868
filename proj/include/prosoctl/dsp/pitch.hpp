// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "prosoctl/dsp/audio.hpp"

namespace prosoctl::dsp {

// RAPT-style tracker: per-frame NCCF peak candidates plus an unvoiced
// hypothesis, resolved by a Viterbi search over local and transition costs.
// Single resolution (no decimated first pass).
struct F0Config {
  double f0_min = 60.0;
  double f0_max = 400.0;
  // Minimum NCCF peak value for a lag to become a voiced candidate.
  double nccf_threshold = 0.3;
  // Voiced->voiced cost per unit |ln(f_t / f_{t-1})|.
  double transition_cost = 0.5;
  // Cost of switching between voiced and unvoiced.
  double voicing_cost = 0.2;
  // Penalty on long lags, relative to the maximum lag (suppresses
  // subharmonic candidates).
  double lag_weight = 0.3;
  // Added to the unvoiced hypothesis' local cost.
  double unvoiced_bias = 0.0;
  int max_candidates = 12;
};

struct F0Frame {
  double f0 = 0.0;  // Hz when voiced, 0 otherwise
  bool voiced = false;
  double nccf_peak = 0.0;  // best NCCF peak in the frame, [-1, 1]
};

struct F0Track {
  std::vector<F0Frame> frames;
  FrameGrid grid;

  std::size_t size() const { return frames.size(); }
};

struct PitchCandidate {
  double lag = 0.0;
  double value = 0.0;
};

struct LagRange {
  int min_lag;
  int max_lag;
};

inline LagRange lag_range(const F0Config& cfg, int sample_rate) {
  return LagRange{static_cast<int>(std::floor(sample_rate / cfg.f0_max)),
                  static_cast<int>(std::ceil(sample_rate / cfg.f0_min))};
}

inline void validate_f0_config(const F0Config& cfg, int sample_rate) {
  if (!(cfg.f0_min > 0.0 && cfg.f0_min < cfg.f0_max)) {
    throw DataError("f0 config: require 0 < f0_min < f0_max");
  }
  if (cfg.f0_max > sample_rate / 4.0) {
    throw DataError("f0 config: f0_max must not exceed sample_rate/4");
  }
  if (cfg.max_candidates < 1) throw DataError("f0 config: max_candidates must be >= 1");
}

/// NCCF between the reference segment x[s, s+w) and x[s+k, s+k+w) for every
/// k in [k_lo, k_hi]. Values are 0 where either segment has no energy.
inline std::vector<double> nccf(const std::vector<double>& x, std::ptrdiff_t s, int w,
                                int k_lo, int k_hi) {
  std::vector<double> out(static_cast<std::size_t>(k_hi - k_lo + 1), 0.0);
  double e0 = 0.0;
  for (int j = 0; j < w; ++j) {
    const double v = sample_or_zero(x, s + j);
    e0 += v * v;
  }
  double ek = 0.0;
  for (int j = 0; j < w; ++j) {
    const double v = sample_or_zero(x, s + k_lo + j);
    ek += v * v;
  }
  constexpr double kFloor = 1e-20;
  for (int k = k_lo; k <= k_hi; ++k) {
    if (k > k_lo) {
      const double leave = sample_or_zero(x, s + k - 1);
      const double enter = sample_or_zero(x, s + k - 1 + w);
      ek = std::max(0.0, ek - leave * leave + enter * enter);
    }
    double cross = 0.0;
    for (int j = 0; j < w; ++j) {
      cross += sample_or_zero(x, s + j) * sample_or_zero(x, s + k + j);
    }
    const double denom = e0 * ek;
    out[static_cast<std::size_t>(k - k_lo)] = denom > kFloor ? cross / std::sqrt(denom) : 0.0;
  }
  return out;
}

inline F0Track estimate_f0(const AudioBuffer& audio, const FrameGrid& grid,
                           const F0Config& cfg = {}) {
  validate_audio(audio);
  check_grid_matches(audio, grid);
  validate_f0_config(cfg, audio.sample_rate);
  const int sr = audio.sample_rate;
  const auto [min_lag, max_lag] = lag_range(cfg, sr);
  const int window = max_lag;  // one period of the lowest pitch
  const std::size_t needed = static_cast<std::size_t>(2) * static_cast<std::size_t>(
                                 std::ceil(sr / cfg.f0_min));
  if (audio.size() < needed) {
    throw DataError("f0: audio has " + std::to_string(audio.size()) +
                    " samples, need at least " + std::to_string(needed) +
                    " for f0_min=" + std::to_string(cfg.f0_min));
  }

  const std::size_t n_frames = grid.n_frames;
  std::vector<std::vector<PitchCandidate>> candidates(n_frames);
  std::vector<double> best_peak(n_frames, 0.0);

  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::ptrdiff_t start = grid.center(t) - (window + max_lag) / 2;
    const int k_lo = std::max(1, min_lag - 1);
    const int k_hi = max_lag + 1;
    const auto r = nccf(audio.samples, start, window, k_lo, k_hi);
    const auto at = [&](int k) { return r[static_cast<std::size_t>(k - k_lo)]; };
    double peak = 0.0;
    std::vector<PitchCandidate> found;
    for (int k = std::max(min_lag, k_lo + 1); k <= std::min(max_lag, k_hi - 1); ++k) {
      const double c = at(k);
      peak = std::max(peak, c);
      if (c < cfg.nccf_threshold || c < at(k - 1) || c <= at(k + 1)) continue;
      // Parabolic refinement around the integer peak.
      const double a = at(k - 1), b = c, d = at(k + 1);
      const double curv = a - 2.0 * b + d;
      double offset = 0.0, value = b;
      if (curv < 0.0) {
        offset = std::clamp(0.5 * (a - d) / curv, -0.5, 0.5);
        value = b - 0.25 * (a - d) * offset;
      }
      const double lag = k + offset;
      const double f0 = sr / lag;
      if (f0 < cfg.f0_min || f0 > cfg.f0_max) continue;
      found.push_back({lag, std::min(value, 1.0)});
    }
    std::stable_sort(found.begin(), found.end(),
                     [](const PitchCandidate& x, const PitchCandidate& y) {
                       return x.value > y.value;
                     });
    if (found.size() > static_cast<std::size_t>(cfg.max_candidates)) {
      found.resize(static_cast<std::size_t>(cfg.max_candidates));
    }
    candidates[t] = std::move(found);
    best_peak[t] = std::clamp(peak, -1.0, 1.0);
  }

  // Viterbi over hypotheses {unvoiced, candidate_0, ...}; state 0 is unvoiced.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> cost(n_frames);
  std::vector<std::vector<int>> back(n_frames);
  const auto local = [&](std::size_t t, std::size_t state) {
    if (state == 0) {
      double m = 0.0;
      for (const auto& c : candidates[t]) m = std::max(m, c.value);
      return cfg.unvoiced_bias + m;
    }
    const auto& c = candidates[t][state - 1];
    return 1.0 - c.value * (1.0 - cfg.lag_weight * c.lag / max_lag);
  };
  const auto freq = [&](std::size_t t, std::size_t state) {
    return sr / candidates[t][state - 1].lag;
  };
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t n_states = candidates[t].size() + 1;
    cost[t].assign(n_states, inf);
    back[t].assign(n_states, -1);
    for (std::size_t s = 0; s < n_states; ++s) {
      const double lc = local(t, s);
      if (t == 0) {
        cost[t][s] = lc;
        continue;
      }
      for (std::size_t p = 0; p < cost[t - 1].size(); ++p) {
        double trans = 0.0;
        if ((p == 0) != (s == 0)) {
          trans = cfg.voicing_cost;
        } else if (s != 0) {
          trans = cfg.transition_cost * std::abs(std::log(freq(t, s) / freq(t - 1, p)));
        }
        const double total = cost[t - 1][p] + trans + lc;
        if (total < cost[t][s]) {
          cost[t][s] = total;
          back[t][s] = static_cast<int>(p);
        }
      }
    }
  }

  F0Track track{std::vector<F0Frame>(n_frames), grid};
  if (n_frames == 0) return track;
  std::size_t state = static_cast<std::size_t>(
      std::min_element(cost.back().begin(), cost.back().end()) - cost.back().begin());
  for (std::size_t t = n_frames; t-- > 0;) {
    F0Frame& f = track.frames[t];
    f.nccf_peak = best_peak[t];
    if (state != 0) {
      f.voiced = true;
      f.f0 = freq(t, state);
    }
    if (t > 0) state = static_cast<std::size_t>(back[t][state]);
  }
  return track;
}

}  // namespace prosoctl::dsp
