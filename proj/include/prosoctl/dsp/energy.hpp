// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <vector>

#include "prosoctl/dsp/audio.hpp"

namespace prosoctl::dsp {

struct EnergyTrack {
  std::vector<double> rms;
  FrameGrid grid;
};

/// Per-frame RMS over the frame's own hop-sized cell, without a taper.
/// Cells past the end of the signal are zero padded.
inline EnergyTrack rms_energy(const AudioBuffer& audio, const FrameGrid& grid) {
  validate_audio(audio);
  check_grid_matches(audio, grid);
  EnergyTrack track{std::vector<double>(grid.n_frames, 0.0), grid};
  const auto hop = static_cast<std::size_t>(grid.hop);
  for (std::size_t t = 0; t < grid.n_frames; ++t) {
    double acc = 0.0;
    const std::size_t begin = t * hop;
    const std::size_t end = std::min(begin + hop, audio.size());
    for (std::size_t i = begin; i < end; ++i) acc += audio.samples[i] * audio.samples[i];
    track.rms[t] = std::sqrt(acc / static_cast<double>(hop));
  }
  return track;
}

}  // namespace prosoctl::dsp
