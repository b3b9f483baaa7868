// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>

#include "prosoctl/features/features.hpp"

namespace prosoctl::features {
namespace {

using corpus::AlignmentSpan;
using corpus::PhoneKind;

struct Tracks {
  dsp::F0Track f0;
  dsp::EnergyTrack energy;
};

Tracks make_tracks(std::size_t n, const std::vector<double>& f0, const std::vector<double>& rms) {
  dsp::FrameGrid grid;
  grid.n_frames = n;
  Tracks t{{std::vector<dsp::F0Frame>(n), grid}, {rms, grid}};
  for (std::size_t i = 0; i < n; ++i) {
    t.f0.frames[i].f0 = f0[i];
    t.f0.frames[i].voiced = f0[i] > 0;
  }
  return t;
}

Utterance utt_with(std::vector<PhoneToken> phones) {
  Utterance u;
  u.utterance_id = "u";
  u.speaker_id = "s";
  u.phones = std::move(phones);
  return u;
}

TEST(Extract, DurationIsInclusiveFrameCount) {
  std::vector<double> f0(20, 120.0), rms(20, 0.1);
  const auto t = make_tracks(20, f0, rms);
  const auto utt = utt_with({{"a", PhoneKind::phone, false, AlignmentSpan{10, 14}}});
  EXPECT_EQ(extract_per_phone(t.f0, t.energy, utt)[0].duration, 5.0);
}

TEST(Extract, BoundaryTokensAreZero) {
  std::vector<double> f0(10, 120.0), rms(10, 0.1);
  const auto t = make_tracks(10, f0, rms);
  const auto utt = utt_with({{"a", PhoneKind::phone, false, AlignmentSpan{0, 4}},
                             {"#", PhoneKind::word_boundary, false, {}},
                             {"b", PhoneKind::phone, false, AlignmentSpan{5, 9}}});
  const auto v = extract_per_phone(t.f0, t.energy, utt);
  EXPECT_EQ(v[1], (AcousticFeatureVector{0, 0, 0}));
}

TEST(Extract, MeansOverVoicedFramesAndAllFrames) {
  const std::vector<double> f0{0, 100, 200, 0, 0, 0, 0};
  const std::vector<double> rms{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  const auto t = make_tracks(7, f0, rms);
  const auto utt = utt_with({{"a", PhoneKind::phone, true, AlignmentSpan{0, 3}},
                             {"s", PhoneKind::phone, false, AlignmentSpan{4, 6}}});
  const auto v = extract_per_phone(t.f0, t.energy, utt);
  EXPECT_DOUBLE_EQ(v[0].f0, 150.0);
  EXPECT_DOUBLE_EQ(v[0].energy, 0.25);
  // All frames unvoiced: f0 sentinel 0, energy still the frame mean.
  EXPECT_EQ(v[1].f0, 0.0);
  EXPECT_DOUBLE_EQ(v[1].energy, 0.6);
  EXPECT_EQ(v[1].duration, 3.0);
}

TEST(Extract, LinearInEnergyTrack) {
  const std::vector<double> f0(8, 150.0);
  std::vector<double> rms{0.11, 0.23, 0.05, 0.31, 0.2, 0.07, 0.4, 0.13};
  const auto utt = utt_with({{"a", PhoneKind::phone, false, AlignmentSpan{0, 2}},
                             {"b", PhoneKind::phone, false, AlignmentSpan{3, 7}}});
  const auto base = extract_per_phone(make_tracks(8, f0, rms).f0, make_tracks(8, f0, rms).energy, utt);
  std::vector<double> scaled = rms;
  for (auto& v : scaled) v *= 2.0;
  const auto t2 = make_tracks(8, f0, scaled);
  const auto out = extract_per_phone(t2.f0, t2.energy, utt);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].energy, 2.0 * base[i].energy);
    EXPECT_EQ(out[i].duration, base[i].duration);
  }
}

TEST(Extract, GridMismatchAndRangeErrors) {
  auto t = make_tracks(5, std::vector<double>(5, 100.0), std::vector<double>(5, 0.1));
  const auto out_of_range = utt_with({{"a", PhoneKind::phone, false, AlignmentSpan{2, 7}}});
  EXPECT_THROW(extract_per_phone(t.f0, t.energy, out_of_range), DataError);
  t.energy.grid.hop = 128;
  const auto ok = utt_with({{"a", PhoneKind::phone, false, AlignmentSpan{0, 2}}});
  EXPECT_THROW(extract_per_phone(t.f0, t.energy, ok), DataError);
}

FeatureRecord record(const std::string& id, std::vector<AcousticFeatureVector> raw,
                     std::vector<PhoneKind> kinds = {}) {
  FeatureRecord r;
  r.utterance_id = id;
  r.speaker_id = "spk";
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto kind = i < kinds.size() ? kinds[i] : PhoneKind::phone;
    r.phones.push_back({kind == PhoneKind::phone ? "a" : "#", kind, false, {}});
  }
  r.raw = std::move(raw);
  return r;
}

TEST(SpeakerStats, PopulationMoments) {
  const std::vector<FeatureRecord> recs{record("u", {{100, 0.1, 3}, {300, 0.3, 5}})};
  const auto s = compute_speaker_stats(recs);
  EXPECT_DOUBLE_EQ(s.duration.mean, 4.0);
  EXPECT_DOUBLE_EQ(s.duration.std, 1.0);
  EXPECT_EQ(s.duration.count, 2u);
}

TEST(SpeakerStats, BoundaryTokensExcluded) {
  const std::vector<FeatureRecord> a{record("u", {{100, 0.1, 3}, {300, 0.3, 5}})};
  const std::vector<FeatureRecord> b{record("u", {{100, 0.1, 3}, {0, 0, 0}, {300, 0.3, 5}},
                                            {PhoneKind::phone, PhoneKind::word_boundary, PhoneKind::phone})};
  EXPECT_EQ(compute_speaker_stats(a), compute_speaker_stats(b));
}

TEST(SpeakerStats, F0UsesVoicedPhonesOnly) {
  const std::vector<FeatureRecord> recs{record("u", {{0, 0.1, 3}, {100, 0.2, 4}, {300, 0.3, 5}})};
  const auto s = compute_speaker_stats(recs);
  EXPECT_DOUBLE_EQ(s.f0.mean, 200.0);
  EXPECT_EQ(s.f0.count, 2u);
  EXPECT_EQ(s.energy.count, 3u);
}

TEST(SpeakerStats, NeedsTwoContributingPhones) {
  const std::vector<FeatureRecord> one{record("u", {{100, 0.1, 3}})};
  EXPECT_THROW(compute_speaker_stats(one), DataError);
  EXPECT_THROW(compute_speaker_stats(std::span<const FeatureRecord>{}), DataError);
}

SpeakerStats stats_of(double f0m, double f0s, double em, double es, double dm, double ds) {
  SpeakerStats s;
  s.f0 = {f0m, f0s, 10};
  s.energy = {em, es, 10};
  s.duration = {dm, ds, 10};
  return s;
}

TEST(Normalize, MeanMapsToZero) {
  const auto s = stats_of(150, 20, 0.1, 0.02, 8, 3);
  const auto z = normalize({150, 0.1, 8}, s, false);
  EXPECT_EQ(z, (AcousticFeatureVector{0, 0, 0, FeatureSpace::normalized}));
}

TEST(Normalize, RoundTripProperty) {
  Rng rng(77);
  for (int i = 0; i < 500; ++i) {
    const auto s = stats_of(rng.uniform(80, 250), rng.uniform(1, 40), rng.uniform(0.01, 0.2),
                            rng.uniform(0.001, 0.05), rng.uniform(3, 15), rng.uniform(0.5, 5));
    const bool voiced = rng.uniform() < 0.8;
    const AcousticFeatureVector raw{voiced ? rng.uniform(60, 400) : 0.0, rng.uniform(0, 0.3),
                                    std::round(rng.uniform(1, 30))};
    const auto back = denormalize(normalize(raw, s, false), s, false, voiced);
    EXPECT_NEAR(back.f0, raw.f0, 1e-9 * std::max(1.0, raw.f0));
    EXPECT_NEAR(back.energy, raw.energy, 1e-9 * std::max(1.0, raw.energy));
    EXPECT_NEAR(back.duration, raw.duration, 1e-9 * raw.duration);
  }
}

TEST(Normalize, ZeroStdUsesEpsilonGuard) {
  const auto s = stats_of(150, 0, 0.1, 0, 5, 0);
  const auto z = normalize({150, 0.1, 5}, s, false);
  EXPECT_EQ(z.f0, 0.0);
  EXPECT_EQ(z.energy, 0.0);
  EXPECT_EQ(z.duration, 0.0);
  EXPECT_TRUE(std::isfinite(normalize({151, 0.2, 6}, s, false).duration));
}

TEST(Normalize, SentinelsPassThrough) {
  const auto s = stats_of(150, 20, 0.1, 0.02, 8, 3);
  const auto boundary = normalize({0, 0, 0}, s, true);
  EXPECT_EQ(boundary, (AcousticFeatureVector{0, 0, 0, FeatureSpace::normalized}));
  EXPECT_EQ(normalize({0, 0.1, 8}, s, false).f0, 0.0);
  EXPECT_EQ(denormalize({1.0, 1.0, 1.0, FeatureSpace::normalized}, s, false, false).f0, 0.0);
  EXPECT_EQ(denormalize({1.0, 1.0, 1.0, FeatureSpace::normalized}, s, true, true),
            (AcousticFeatureVector{0, 0, 0}));
}

TEST(Normalize, SpaceMismatchRejected) {
  const auto s = stats_of(150, 20, 0.1, 0.02, 8, 3);
  EXPECT_THROW(normalize({1, 1, 1, FeatureSpace::normalized}, s, false), DataError);
  EXPECT_THROW(denormalize({1, 1, 1, FeatureSpace::raw}, s, false, true), DataError);
}

TEST(Normalize, TrainingFeaturesHaveZeroMeanUnitStd) {
  Rng rng(5);
  std::vector<FeatureRecord> recs;
  for (int u = 0; u < 8; ++u) {
    std::vector<AcousticFeatureVector> raw;
    std::vector<PhoneKind> kinds;
    for (int p = 0; p < 25; ++p) {
      if (p % 6 == 0) {
        raw.push_back({0, 0, 0});
        kinds.push_back(PhoneKind::word_boundary);
      } else {
        raw.push_back({rng.uniform() < 0.3 ? 0.0 : rng.uniform(90, 220), rng.uniform(0.01, 0.2),
                       std::round(rng.uniform(2, 20))});
        kinds.push_back(PhoneKind::phone);
      }
    }
    recs.push_back(record("u" + std::to_string(u), raw, kinds));
  }
  const auto table = build_stats_table(recs);
  for (auto& r : recs) normalize_record(r, table);
  for (Feature f : kAllFeatures) {
    std::vector<double> zs;
    for (const auto& r : recs) {
      for (std::size_t i = 0; i < r.phones.size(); ++i) {
        if (r.phones[i].is_boundary()) continue;
        if (f == Feature::f0 && r.raw[i].f0 == 0.0) continue;
        zs.push_back(r.normalized[i][f]);
      }
    }
    double mean = 0.0, sq = 0.0;
    for (double z : zs) mean += z;
    mean /= static_cast<double>(zs.size());
    for (double z : zs) sq += (z - mean) * (z - mean);
    EXPECT_LT(std::abs(mean), 1e-9) << to_string(f);
    EXPECT_LT(std::abs(std::sqrt(sq / static_cast<double>(zs.size())) - 1.0), 1e-9) << to_string(f);
  }
}

TEST(StatsTable, JsonRoundTripKeepsVersion) {
  const std::vector<FeatureRecord> recs{record("u", {{100, 0.1, 3}, {300, 0.3, 5}, {200, 0.2, 4}})};
  const auto table = build_stats_table(recs);
  const auto back = stats_from_json(to_json(table));
  EXPECT_EQ(back.version, table.version);
  EXPECT_EQ(back.at("spk"), table.at("spk"));
  auto tampered = to_json(table);
  tampered["speakers"]["spk"]["f0"]["mean"] = 123.0;
  EXPECT_THROW(stats_from_json(tampered), VersionError);
}

}  // namespace
}  // namespace prosoctl::features
