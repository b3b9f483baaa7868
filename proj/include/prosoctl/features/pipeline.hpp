// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "prosoctl/corpus/feature_store.hpp"
#include "prosoctl/dsp/energy.hpp"
#include "prosoctl/dsp/pitch.hpp"
#include "prosoctl/features/features.hpp"

namespace prosoctl::features {

struct AnalysisConfig {
  int fft_size = dsp::kDefaultFftSize;
  dsp::Window window = dsp::Window::hann;
  dsp::F0Config f0;
};

struct Analysis {
  dsp::F0Track f0;
  dsp::EnergyTrack energy;
  std::vector<AcousticFeatureVector> per_phone;
};

/// Runs F0 and energy analysis on the utterance's hop and pools per phone.
inline Analysis analyze(const dsp::AudioBuffer& audio, const Utterance& utt,
                        const AnalysisConfig& cfg = {}) {
  if (audio.sample_rate != utt.sample_rate) {
    throw DataError("analyze " + utt.utterance_id + ": audio sample rate " +
                    std::to_string(audio.sample_rate) + " does not match alignment " +
                    std::to_string(utt.sample_rate));
  }
  const auto grid = dsp::FrameGrid::for_length(audio.size(), cfg.fft_size, utt.hop, cfg.window);
  Analysis a{dsp::estimate_f0(audio, grid, cfg.f0), dsp::rms_energy(audio, grid), {}};
  a.per_phone = extract_per_phone(a.f0, a.energy, utt);
  return a;
}

/// Raw-only feature record for an aligned utterance.
inline FeatureRecord extract_record(const dsp::AudioBuffer& audio, const Utterance& utt,
                                    const AnalysisConfig& cfg = {}) {
  FeatureRecord r;
  r.utterance_id = utt.utterance_id;
  r.speaker_id = utt.speaker_id;
  r.phones = utt.phones;
  for (auto& p : r.phones) p.span.reset();
  r.raw = analyze(audio, utt, cfg).per_phone;
  return r;
}

}  // namespace prosoctl::features
