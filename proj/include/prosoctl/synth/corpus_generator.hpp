// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "prosoctl/common.hpp"
#include "prosoctl/synth/synth.hpp"

namespace prosoctl::synth {

struct SpeakerProfile {
  std::string speaker_id;
  double f0_hz = 150.0;
  double energy = 0.1;
  double tempo = 1.0;  // duration multiplier
};

struct CorpusGeneratorConfig {
  std::size_t n_utterances = 20;
  std::vector<SpeakerProfile> speakers{{"spk_f", 205.0, 0.10, 1.0}, {"spk_m", 115.0, 0.12, 1.15}};
  std::size_t min_words = 2;
  std::size_t max_words = 4;
  std::uint64_t seed = 0;
  SynthConfig synth;
};

struct GeneratedUtterance {
  Utterance utterance;  // aligned to the rendered audio
  dsp::AudioBuffer audio;
  std::vector<AcousticFeatureVector> targets;  // raw values given to the synthesizer
};

namespace detail {

inline const std::vector<std::string>& generator_vowels() {
  static const std::vector<std::string> v{"a", "e", "i", "o", "u"};
  return v;
}
inline const std::vector<std::string>& generator_consonants() {
  static const std::vector<std::string> c{"m", "n", "l", "r", "b", "d", "g", "s", "f", "p", "t", "k"};
  return c;
}

inline double vowel_f0_offset(const std::string& v) {
  if (v == "i" || v == "u") return 0.04;
  if (v == "a") return -0.03;
  return 0.0;
}

}  // namespace detail

/// Word-structured random utterances with prosody that depends on phone
/// class, stress, position and speaker, rendered by the synthesizer.
inline std::vector<GeneratedUtterance> generate_corpus(const CorpusGeneratorConfig& cfg) {
  if (cfg.speakers.empty()) throw UsageError("corpus generator: no speakers");
  if (cfg.min_words < 1 || cfg.max_words < cfg.min_words)
    throw UsageError("corpus generator: need 1 <= min_words <= max_words");
  std::vector<GeneratedUtterance> out;
  for (std::size_t u = 0; u < cfg.n_utterances; ++u) {
    const auto& spk = cfg.speakers[u % cfg.speakers.size()];
    Rng rng(derive_seed(cfg.seed, "corpus:utt:" + std::to_string(u)));
    char id[32];
    std::snprintf(id, sizeof(id), "utt%04zu", u);

    Utterance utt;
    utt.utterance_id = id;
    utt.speaker_id = spk.speaker_id;
    utt.sample_rate = cfg.synth.sample_rate;
    utt.hop = cfg.synth.hop;
    std::vector<AcousticFeatureVector> feats;
    const auto push_boundary = [&](corpus::PhoneKind kind, const char* symbol) {
      utt.phones.push_back({symbol, kind, false, {}});
      feats.push_back({0, 0, 0});
    };

    push_boundary(corpus::PhoneKind::sentence_boundary, "<s>");
    utt.phones.push_back({"sil", corpus::PhoneKind::phone, false, {}});
    feats.push_back({0, 0.1 * spk.energy, std::round(4 * spk.tempo)});

    const std::size_t words = cfg.min_words + rng.index(cfg.max_words - cfg.min_words + 1);
    std::vector<std::pair<std::string, bool>> seq;
    for (std::size_t w = 0; w < words; ++w) {
      const std::size_t syllables = 1 + rng.index(3);
      const std::size_t stressed = rng.index(syllables);
      std::vector<std::pair<std::string, bool>> word;
      for (std::size_t s = 0; s < syllables; ++s) {
        word.push_back({detail::generator_consonants()[rng.index(12)], false});
        word.push_back({detail::generator_vowels()[rng.index(5)], s == stressed});
        if (rng.uniform() < 0.3) word.push_back({detail::generator_consonants()[rng.index(12)], false});
      }
      if (w > 0) seq.push_back({"#", false});
      seq.insert(seq.end(), word.begin(), word.end());
    }
    const double n_seq = static_cast<double>(seq.size());
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const auto& [sym, stressed] = seq[k];
      if (sym == "#") {
        push_boundary(corpus::PhoneKind::word_boundary, "#");
        continue;
      }
      const bool vowel = corpus::is_vowel(sym);
      const bool voiced = cfg.synth.timbre.voiced(sym);
      const double position = static_cast<double>(k) / n_seq;
      double f0 = 0.0;
      if (voiced) {
        f0 = spk.f0_hz * (1.0 + 0.08 * stressed - 0.1 * position + detail::vowel_f0_offset(sym) +
                          0.03 * rng.normal());
      }
      const double cls = vowel ? 1.0 : (voiced ? 0.5 : 0.3);
      const double energy =
          spk.energy * cls * (1.0 + 0.3 * stressed) * std::max(0.5, 1.0 + 0.1 * rng.normal());
      const double base = vowel ? 7.0 : 6.0;
      const double duration = std::max(
          2.0, std::round(spk.tempo * base * (1.0 + 0.2 * stressed) * (1.0 + 0.3 * rng.normal())));
      utt.phones.push_back({sym, corpus::PhoneKind::phone, stressed, {}});
      feats.push_back({f0, energy, duration});
    }
    utt.phones.push_back({"sil", corpus::PhoneKind::phone, false, {}});
    feats.push_back({0, 0.1 * spk.energy, std::round(5 * spk.tempo)});
    push_boundary(corpus::PhoneKind::sentence_boundary, "</s>");

    SynthConfig scfg = cfg.synth;
    scfg.seed = derive_seed(cfg.seed, std::string("corpus:noise:") + id);
    Rendition r = synthesize(utt, feats, scfg);
    out.push_back({std::move(r.alignment), std::move(r.audio), std::move(r.features)});
  }
  return out;
}

}  // namespace prosoctl::synth
