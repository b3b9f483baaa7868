// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "prosoctl/afp/model.hpp"
#include "prosoctl/control/edits.hpp"
#include "prosoctl/features/pipeline.hpp"
#include "prosoctl/synth/synth.hpp"

namespace prosoctl::eval {

using corpus::FeatureRecord;
using corpus::PhoneToken;
using corpus::Utterance;
using features::SpeakerStats;
using features::StatsTable;

/// Everything needed to go from normalized features to measured audio.
struct RenderSetup {
  synth::SynthConfig synth;
  features::AnalysisConfig analysis;
  unsigned jobs = 1;
};

/// Utterance skeleton (ids and tokens, no spans) of a feature record.
inline Utterance utterance_of(const FeatureRecord& r, int sample_rate, int hop) {
  Utterance u;
  u.utterance_id = r.utterance_id;
  u.speaker_id = r.speaker_id;
  u.phones = r.phones;
  for (auto& p : u.phones) p.span.reset();
  u.sample_rate = sample_rate;
  u.hop = hop;
  return u;
}

/// Normalized to raw, taking voicing from the synthesizer's timbre table.
inline std::vector<AcousticFeatureVector> to_raw(const std::vector<AcousticFeatureVector>& z,
                                                 const std::vector<PhoneToken>& phones,
                                                 const SpeakerStats& stats,
                                                 const synth::TimbreTable& timbre) {
  if (z.size() != phones.size()) throw DataError("to_raw: feature count does not match phones");
  std::vector<AcousticFeatureVector> out;
  out.reserve(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const bool boundary = phones[i].is_boundary();
    const bool voiced = !boundary && timbre.voiced(phones[i].symbol);
    out.push_back(features::denormalize(z[i], stats, boundary, voiced));
  }
  return out;
}

struct Rendered {
  synth::Rendition rendition;
  features::Analysis analysis;
};

/// Synthesizes and re-analyzes. The noise seed depends only on the
/// utterance id, so renditions of one utterance differ only through the
/// features.
inline Rendered render(const Utterance& utt, const std::vector<AcousticFeatureVector>& normalized,
                       const SpeakerStats& stats, const RenderSetup& setup) {
  synth::SynthConfig cfg = setup.synth;
  cfg.seed = derive_seed(setup.synth.seed, "render:" + utt.utterance_id);
  Rendered out;
  out.rendition =
      synth::synthesize(utt, to_raw(normalized, utt.phones, stats, setup.synth.timbre), cfg);
  out.analysis = features::analyze(out.rendition.audio, out.rendition.alignment, setup.analysis);
  return out;
}

/// Utterance-level aggregates: F0 over voiced frames, mean frame RMS,
/// total frame count.
struct UtteranceMeasures {
  double f0 = 0.0;
  double energy = 0.0;
  double duration = 0.0;
  double operator[](Feature f) const {
    return f == Feature::f0 ? f0 : (f == Feature::energy ? energy : duration);
  }
};

inline UtteranceMeasures utterance_measures(const features::Analysis& a) {
  UtteranceMeasures m;
  double f0_sum = 0.0;
  std::size_t voiced = 0;
  for (const auto& fr : a.f0.frames) {
    if (!fr.voiced) continue;
    f0_sum += fr.f0;
    ++voiced;
  }
  m.f0 = voiced ? f0_sum / static_cast<double>(voiced) : 0.0;
  double e = 0.0;
  for (double v : a.energy.rms) e += v;
  m.energy = a.energy.rms.empty() ? 0.0 : e / static_cast<double>(a.energy.rms.size());
  m.duration = static_cast<double>(a.energy.rms.size());
  return m;
}

/// (x - base) / base, or the plain difference when base is 0.
inline double relative_delta(double x, double base) {
  return base != 0.0 ? (x - base) / base : x - base;
}

}  // namespace prosoctl::eval
