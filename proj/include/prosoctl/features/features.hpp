// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosoctl/common.hpp"
#include "prosoctl/corpus/feature_store.hpp"
#include "prosoctl/corpus/phone.hpp"
#include "prosoctl/dsp/energy.hpp"
#include "prosoctl/dsp/pitch.hpp"
#include "prosoctl/features/vector.hpp"

namespace prosoctl::features {

using corpus::FeatureRecord;
using corpus::PhoneToken;
using corpus::Utterance;

/// Raw per-phone features: mean F0 over the phone's voiced frames (0 if
/// none), mean frame RMS, and the frame count end-start+1. Boundary tokens
/// are (0, 0, 0).
inline std::vector<AcousticFeatureVector> extract_per_phone(const dsp::F0Track& f0,
                                                            const dsp::EnergyTrack& energy,
                                                            const Utterance& utt) {
  if (!(f0.grid == energy.grid) || f0.frames.size() != energy.rms.size()) {
    throw DataError("extract " + utt.utterance_id + ": F0 and energy tracks use different grids");
  }
  if (f0.grid.hop != utt.hop) {
    throw DataError("extract " + utt.utterance_id + ": alignment hop " + std::to_string(utt.hop) +
                    " does not match analysis hop " + std::to_string(f0.grid.hop));
  }
  std::vector<AcousticFeatureVector> out;
  out.reserve(utt.phones.size());
  for (std::size_t i = 0; i < utt.phones.size(); ++i) {
    const auto& tok = utt.phones[i];
    AcousticFeatureVector v;
    if (tok.is_boundary()) {
      out.push_back(v);
      continue;
    }
    if (!tok.span) throw DataError("extract " + utt.utterance_id + ": phone " + std::to_string(i) + " has no span");
    const auto [a, b] = *tok.span;
    if (b >= f0.frames.size()) {
      throw DataError("extract " + utt.utterance_id + ": phone " + std::to_string(i) + " span ends at frame " +
                      std::to_string(b) + " but tracks have " + std::to_string(f0.frames.size()) + " frames");
    }
    double f0_sum = 0.0, e_sum = 0.0;
    std::size_t voiced = 0;
    for (std::size_t t = a; t <= b; ++t) {
      if (f0.frames[t].voiced) {
        f0_sum += f0.frames[t].f0;
        ++voiced;
      }
      e_sum += energy.rms[t];
    }
    v.f0 = voiced ? f0_sum / static_cast<double>(voiced) : 0.0;
    v.energy = e_sum / static_cast<double>(b - a + 1);
    v.duration = static_cast<double>(b - a + 1);
    out.push_back(v);
  }
  return out;
}

struct FeatureStat {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;

  friend bool operator==(const FeatureStat&, const FeatureStat&) = default;
};

struct SpeakerStats {
  std::string speaker_id;
  FeatureStat f0;  // voiced phones only
  FeatureStat energy;
  FeatureStat duration;
  std::string stats_version;

  const FeatureStat& operator[](Feature f) const {
    switch (f) {
      case Feature::f0: return f0;
      case Feature::energy: return energy;
      case Feature::duration: return duration;
    }
    throw std::logic_error("bad feature");
  }

  friend bool operator==(const SpeakerStats&, const SpeakerStats&) = default;
};

inline constexpr double kStdEpsilon = 1e-8;

inline double scale_of(const FeatureStat& s) { return std::max(s.std, kStdEpsilon); }

namespace detail {

inline FeatureStat population_stat(const std::vector<double>& values, const std::string& what) {
  if (values.size() < 2) {
    throw DataError("speaker stats: need at least 2 contributing phones for " + what + ", got " +
                    std::to_string(values.size()));
  }
  FeatureStat s;
  s.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

}  // namespace detail

/// Population mean/std over one speaker's training records. F0 uses voiced
/// phones only (raw f0 > 0); energy and duration skip boundary tokens.
/// Records are reduced in utterance_id order.
inline SpeakerStats compute_speaker_stats(std::span<const FeatureRecord> records) {
  if (records.empty()) throw DataError("speaker stats: no records");
  std::vector<const FeatureRecord*> ordered;
  for (const auto& r : records) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->utterance_id < b->utterance_id; });
  const std::string& speaker = ordered.front()->speaker_id;
  std::vector<double> f0, energy, duration;
  for (const auto* r : ordered) {
    if (r->speaker_id != speaker) {
      throw DataError("speaker stats: mixed speakers " + speaker + " and " + r->speaker_id);
    }
    if (r->raw.size() != r->phones.size()) throw DataError("speaker stats: record " + r->utterance_id + " is malformed");
    for (std::size_t i = 0; i < r->phones.size(); ++i) {
      if (r->phones[i].is_boundary()) continue;
      const auto& v = r->raw[i];
      if (v.f0 > 0.0) f0.push_back(v.f0);
      energy.push_back(v.energy);
      duration.push_back(v.duration);
    }
  }
  SpeakerStats s;
  s.speaker_id = speaker;
  s.f0 = detail::population_stat(f0, "f0 (voiced phones of " + speaker + ")");
  s.energy = detail::population_stat(energy, "energy (" + speaker + ")");
  s.duration = detail::population_stat(duration, "duration (" + speaker + ")");
  return s;
}

/// Statistics for every speaker, identified by a content-derived version.
struct StatsTable {
  std::map<std::string, SpeakerStats> speakers;
  std::string version;

  const SpeakerStats& at(const std::string& speaker_id) const {
    const auto it = speakers.find(speaker_id);
    if (it == speakers.end()) throw DataError("no speaker stats for " + speaker_id);
    return it->second;
  }
};

inline nlohmann::json stats_body(const StatsTable& t) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, s] : t.speakers) {
    nlohmann::json sj;
    for (Feature f : kAllFeatures) {
      const auto& fs = s[f];
      sj[to_string(f)] = {{"mean", fs.mean}, {"std", fs.std}, {"count", fs.count}};
    }
    j[id] = sj;
  }
  return j;
}

inline void seal(StatsTable& t) {
  t.version = "stats-" + to_hex(fnv1a64(stats_body(t).dump()));
  for (auto& [_, s] : t.speakers) s.stats_version = t.version;
}

inline StatsTable build_stats_table(std::span<const FeatureRecord> training_records) {
  std::map<std::string, std::vector<FeatureRecord>> by_speaker;
  for (const auto& r : training_records) by_speaker[r.speaker_id].push_back(r);
  StatsTable t;
  for (const auto& [id, recs] : by_speaker) t.speakers[id] = compute_speaker_stats(recs);
  seal(t);
  return t;
}

inline nlohmann::json to_json(const StatsTable& t) {
  return nlohmann::json{{"stats_version", t.version}, {"speakers", stats_body(t)}};
}

inline StatsTable stats_from_json(const nlohmann::json& j) {
  StatsTable t;
  try {
    for (const auto& [id, sj] : j.at("speakers").items()) {
      SpeakerStats s;
      s.speaker_id = id;
      for (Feature f : kAllFeatures) {
        const auto& fj = sj.at(to_string(f));
        FeatureStat fs{fj.at("mean").get<double>(), fj.at("std").get<double>(),
                       fj.at("count").get<std::size_t>()};
        if (fs.std < 0.0 || fs.count == 0) throw DataError("speaker stats " + id + ": invalid " + to_string(f));
        (f == Feature::f0 ? s.f0 : f == Feature::energy ? s.energy : s.duration) = fs;
      }
      t.speakers[id] = s;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("speaker stats: malformed JSON: ") + e.what());
  }
  seal(t);
  if (j.contains("stats_version") && j["stats_version"].get<std::string>() != t.version) {
    throw VersionError("speaker stats: stats_version does not match contents");
  }
  return t;
}

inline void save_stats(const std::string& path, const StatsTable& t) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << to_json(t).dump(2) << "\n";
}

inline StatsTable load_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stats file " + path);
  try {
    return stats_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
}

/// z = (x - mean) / max(std, eps). Boundary tokens and the unvoiced F0
/// sentinel (raw 0) stay 0.
inline AcousticFeatureVector normalize(const AcousticFeatureVector& raw, const SpeakerStats& stats,
                                       bool is_boundary) {
  if (raw.space != FeatureSpace::raw) throw DataError("normalize: vector is already normalized");
  AcousticFeatureVector z;
  z.space = FeatureSpace::normalized;
  if (is_boundary) return z;
  z.f0 = raw.f0 == 0.0 ? 0.0 : (raw.f0 - stats.f0.mean) / scale_of(stats.f0);
  z.energy = (raw.energy - stats.energy.mean) / scale_of(stats.energy);
  z.duration = (raw.duration - stats.duration.mean) / scale_of(stats.duration);
  return z;
}

/// Inverse of normalize. `voiced` selects whether F0 maps back through the
/// speaker statistics or to the unvoiced sentinel 0.
inline AcousticFeatureVector denormalize(const AcousticFeatureVector& z, const SpeakerStats& stats,
                                         bool is_boundary, bool voiced) {
  if (z.space != FeatureSpace::normalized) throw DataError("denormalize: vector is not normalized");
  AcousticFeatureVector raw;
  raw.space = FeatureSpace::raw;
  if (is_boundary) return raw;
  raw.f0 = voiced ? stats.f0.mean + z.f0 * scale_of(stats.f0) : 0.0;
  raw.energy = stats.energy.mean + z.energy * scale_of(stats.energy);
  raw.duration = stats.duration.mean + z.duration * scale_of(stats.duration);
  return raw;
}

inline double denormalize_value(Feature f, double z, const SpeakerStats& s) {
  return s[f].mean + z * scale_of(s[f]);
}

inline double normalize_value(Feature f, double x, const SpeakerStats& s) {
  return (x - s[f].mean) / scale_of(s[f]);
}

/// Fills record.normalized from record.raw with the table's statistics.
inline void normalize_record(FeatureRecord& record, const StatsTable& table) {
  const auto& stats = table.at(record.speaker_id);
  record.normalized.clear();
  for (std::size_t i = 0; i < record.raw.size(); ++i) {
    record.normalized.push_back(normalize(record.raw[i], stats, record.phones[i].is_boundary()));
  }
  record.stats_version = table.version;
}

}  // namespace prosoctl::features
