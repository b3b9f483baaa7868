// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosoctl/afp/train.hpp"
#include "prosoctl/eval/render.hpp"

namespace prosoctl::eval {

inline const std::vector<double>& default_grid() {
  static const std::vector<double> g{-0.5, -0.25, 0.0, 0.25, 0.5};
  return g;
}

/// Mean and population std of a sample, plus the largest magnitude seen.
struct MeasureStats {
  double mean = 0.0;
  double std = 0.0;
  double max_abs = 0.0;
  std::size_t n = 0;
};

inline MeasureStats summarize(const std::vector<double>& values) {
  MeasureStats s;
  s.n = values.size();
  if (values.empty()) return s;
  for (double v : values) {
    s.mean += v;
    s.max_abs = std::max(s.max_abs, std::abs(v));
  }
  s.mean /= static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

/// Relative deltas of one measured feature within one phone group.
using GroupStats = std::array<MeasureStats, 3>;  // indexed by Feature

struct LevelReport {
  double shift = 0.0;
  // Set for duration shifts below -0.25 sigma, where the one-frame clamp
  // becomes active.
  bool flagged = false;
  std::size_t clamped_phones = 0;
  std::map<std::string, GroupStats> groups;
};

struct ExperimentReport {
  std::string kind;  // disentanglement | temporal_precision
  Feature edited = Feature::f0;
  std::vector<double> grid;
  std::vector<LevelReport> levels;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> utterance_ids;
  nlohmann::json config = nlohmann::json::object();

  const LevelReport& level(double shift) const {
    for (const auto& l : levels)
      if (l.shift == shift) return l;
    throw UsageError("report has no grid point " + std::to_string(shift));
  }
  /// Mean relative delta of `measured` in `group` across the grid.
  std::vector<double> curve(const std::string& group, Feature measured) const {
    std::vector<double> out;
    for (const auto& l : levels) out.push_back(l.groups.at(group)[static_cast<int>(measured)].mean);
    return out;
  }
};

inline bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

inline std::vector<double> sorted_grid(std::vector<double> grid) {
  if (grid.empty()) throw UsageError("experiment: empty shift grid");
  for (double g : grid)
    if (!std::isfinite(g)) throw UsageError("experiment: non-finite grid value");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

/// Inputs shared by the experiments: utterances to render and the
/// statistics used to move between normalized and raw space.
struct EvalCorpus {
  std::vector<Utterance> utterances;
  StatsTable stats;
};

inline EvalCorpus eval_corpus(const std::vector<FeatureRecord>& records, const StatsTable& stats,
                              int sample_rate, int hop) {
  EvalCorpus c;
  c.stats = stats;
  for (const auto& r : records) {
    if (!r.stats_version.empty() && r.stats_version != stats.version)
      throw VersionError("experiment: record '" + r.utterance_id + "' uses stats " +
                         r.stats_version + ", expected " + stats.version);
    c.utterances.push_back(utterance_of(r, sample_rate, hop));
  }
  std::sort(c.utterances.begin(), c.utterances.end(),
            [](const Utterance& a, const Utterance& b) { return a.utterance_id < b.utterance_id; });
  return c;
}

namespace detail {

inline std::size_t count_clamped(const std::vector<AcousticFeatureVector>& edited,
                                 const std::vector<PhoneToken>& phones, const SpeakerStats& stats) {
  const double floor = control::min_normalized_duration(stats);
  std::size_t n = 0;
  for (std::size_t i = 0; i < phones.size(); ++i)
    if (!phones[i].is_boundary() && edited[i].duration == floor) ++n;
  return n;
}

inline nlohmann::json setup_json(const RenderSetup& s) {
  return {{"sample_rate", s.synth.sample_rate},
          {"hop", s.synth.hop},
          {"crossfade_ms", s.synth.crossfade_ms},
          {"synth_seed", s.synth.seed},
          {"fft_size", s.analysis.fft_size},
          {"f0_min", s.analysis.f0.f0_min},
          {"f0_max", s.analysis.f0.f0_max}};
}

}  // namespace detail

/// Shifts the whole contour of one feature by each grid fraction of the
/// speaker's std and measures utterance-level changes against shift 0.
inline ExperimentReport run_disentanglement(const EvalCorpus& corpus, const afp::AfpCheckpoint& ckpt,
                                            const RenderSetup& setup, std::vector<double> grid,
                                            Feature feature) {
  if (corpus.utterances.empty()) throw DataError("disentanglement: empty corpus");
  grid = sorted_grid(std::move(grid));
  const std::size_t nu = corpus.utterances.size();
  const std::size_t ng = grid.size();
  // measures[u][g], clamped[u][g]
  std::vector<std::vector<UtteranceMeasures>> measures(nu, std::vector<UtteranceMeasures>(ng));
  std::vector<UtteranceMeasures> base(nu);
  std::vector<std::vector<std::size_t>> clamped(nu, std::vector<std::size_t>(ng));
  parallel_for(nu, setup.jobs, [&](std::size_t u) {
    const Utterance& utt = corpus.utterances[u];
    const auto& stats = corpus.stats.at(utt.speaker_id);
    const auto predicted = afp::afp_forward(utt.phones, utt.speaker_id, ckpt);
    base[u] = utterance_measures(
        render(utt, control::apply_edits(predicted, {}, utt.phones, stats), stats, setup).analysis);
    for (std::size_t g = 0; g < ng; ++g) {
      const auto edited =
          control::apply_edits(predicted, control::shift_all(feature, grid[g]), utt.phones, stats);
      clamped[u][g] = feature == Feature::duration ? detail::count_clamped(edited, utt.phones, stats) : 0;
      measures[u][g] = grid[g] == 0.0 ? base[u] : utterance_measures(render(utt, edited, stats, setup).analysis);
    }
  });

  ExperimentReport report;
  report.kind = "disentanglement";
  report.edited = feature;
  report.grid = grid;
  report.seeds = {ckpt.seed};
  for (const auto& u : corpus.utterances) report.utterance_ids.push_back(u.utterance_id);
  report.config = detail::setup_json(setup);
  report.config["stats_version"] = corpus.stats.version;
  for (std::size_t g = 0; g < ng; ++g) {
    LevelReport level;
    level.shift = grid[g];
    level.flagged = feature == Feature::duration && grid[g] < -0.25;
    GroupStats stats;
    for (Feature m : kAllFeatures) {
      std::vector<double> deltas;
      for (std::size_t u = 0; u < nu; ++u) deltas.push_back(relative_delta(measures[u][g][m], base[u][m]));
      stats[static_cast<int>(m)] = summarize(deltas);
    }
    for (std::size_t u = 0; u < nu; ++u) level.clamped_phones += clamped[u][g];
    level.groups["utterance"] = stats;
    report.levels.push_back(level);
  }
  return report;
}

/// Edits only a seeded subset of stressed vowels per utterance and
/// measures per-phone changes for the modified and unmodified groups.
inline ExperimentReport run_temporal_precision(const EvalCorpus& corpus,
                                               const afp::AfpCheckpoint& ckpt,
                                               const RenderSetup& setup, double fraction,
                                               std::uint64_t seed, std::vector<double> grid,
                                               Feature feature) {
  if (corpus.utterances.empty()) throw DataError("temporal precision: empty corpus");
  grid = sorted_grid(std::move(grid));
  const std::size_t nu = corpus.utterances.size();
  const std::size_t ng = grid.size();
  // deltas[u][g][group][feature] -> per-utterance group mean, plus all
  // per-phone values for the max_abs column.
  struct Cell {
    std::array<std::array<std::vector<double>, 3>, 2> phone_deltas;
    std::size_t clamped = 0;
  };
  std::vector<std::vector<Cell>> cells(nu, std::vector<Cell>(ng));
  parallel_for(nu, setup.jobs, [&](std::size_t u) {
    const Utterance& utt = corpus.utterances[u];
    const auto& stats = corpus.stats.at(utt.speaker_id);
    const auto predicted = afp::afp_forward(utt.phones, utt.speaker_id, ckpt);
    const auto selected = control::select_stressed_vowel_subset(
        utt.phones, fraction, derive_seed(seed, "temporal:" + utt.utterance_id));
    const auto base = render(utt, control::apply_edits(predicted, {}, utt.phones, stats), stats, setup);
    const auto& base_m = base.analysis.per_phone;
    for (std::size_t g = 0; g < ng; ++g) {
      control::EditScript script;
      script.ops.push_back({control::PhoneIndices{selected}, feature, control::ShiftSigma{grid[g]}});
      const auto edited = control::apply_edits(predicted, script, utt.phones, stats);
      if (feature == Feature::duration) {
        const double floor = control::min_normalized_duration(stats);
        for (std::size_t i : selected) cells[u][g].clamped += edited[i].duration == floor ? 1 : 0;
      }
      const auto r = grid[g] == 0.0 ? base : render(utt, edited, stats, setup);
      const auto& m = r.analysis.per_phone;
      for (std::size_t i = 0; i < utt.phones.size(); ++i) {
        if (utt.phones[i].is_boundary()) continue;
        const int group = selected.count(i) ? 0 : 1;
        for (Feature f : kAllFeatures) {
          if (f == Feature::f0) {
            if (!setup.synth.timbre.voiced(utt.phones[i].symbol)) continue;
            if (base_m[i].f0 == 0.0 || m[i].f0 == 0.0) continue;
          }
          cells[u][g].phone_deltas[group][static_cast<int>(f)].push_back(
              relative_delta(m[i][f], base_m[i][f]));
        }
      }
    }
  });

  ExperimentReport report;
  report.kind = "temporal_precision";
  report.edited = feature;
  report.grid = grid;
  report.seeds = {ckpt.seed, seed};
  for (const auto& u : corpus.utterances) report.utterance_ids.push_back(u.utterance_id);
  report.config = detail::setup_json(setup);
  report.config["fraction"] = fraction;
  report.config["selection_seed"] = seed;
  report.config["stats_version"] = corpus.stats.version;
  const char* names[2] = {"modified", "unmodified"};
  for (std::size_t g = 0; g < ng; ++g) {
    LevelReport level;
    level.shift = grid[g];
    level.flagged = feature == Feature::duration && grid[g] < -0.25;
    for (int group = 0; group < 2; ++group) {
      GroupStats stats;
      for (Feature f : kAllFeatures) {
        std::vector<double> utterance_means;
        double max_abs = 0.0;
        for (std::size_t u = 0; u < nu; ++u) {
          const auto& v = cells[u][g].phone_deltas[group][static_cast<int>(f)];
          if (v.empty()) continue;
          const auto s = summarize(v);
          utterance_means.push_back(s.mean);
          max_abs = std::max(max_abs, s.max_abs);
        }
        auto s = summarize(utterance_means);
        s.max_abs = max_abs;
        stats[static_cast<int>(f)] = s;
      }
      level.groups[names[group]] = stats;
    }
    for (std::size_t u = 0; u < nu; ++u) level.clamped_phones += cells[u][g].clamped;
    report.levels.push_back(level);
  }
  return report;
}

struct ReproducibilityReport {
  std::vector<ExperimentReport> per_seed;
  // divergence[g][feature]: max over seed pairs of |mean delta difference|.
  std::vector<std::array<double, 3>> divergence;
  bool signs_agree = true;
  bool all_monotone = true;
};

inline int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

inline ReproducibilityReport summarize_reproducibility(std::vector<ExperimentReport> reports) {
  ReproducibilityReport out;
  out.per_seed = std::move(reports);
  if (out.per_seed.empty()) return out;
  const auto& first = out.per_seed.front();
  const Feature edited = first.edited;
  out.divergence.assign(first.grid.size(), {0.0, 0.0, 0.0});
  for (const auto& r : out.per_seed) {
    if (r.grid != first.grid) throw DataError("reproducibility: grids differ between seeds");
    out.all_monotone = out.all_monotone && strictly_increasing(r.curve("utterance", edited));
  }
  for (std::size_t g = 0; g < first.grid.size(); ++g) {
    for (std::size_t a = 0; a < out.per_seed.size(); ++a) {
      for (std::size_t b = a + 1; b < out.per_seed.size(); ++b) {
        for (Feature f : kAllFeatures) {
          const double x = out.per_seed[a].levels[g].groups.at("utterance")[static_cast<int>(f)].mean;
          const double y = out.per_seed[b].levels[g].groups.at("utterance")[static_cast<int>(f)].mean;
          auto& d = out.divergence[g][static_cast<int>(f)];
          d = std::max(d, std::abs(x - y));
          if (f == edited && sign_of(x) != sign_of(y)) out.signs_agree = false;
        }
      }
    }
  }
  return out;
}

/// Trains one predictor per seed on `train` and runs the disentanglement
/// experiment with each.
inline ReproducibilityReport run_reproducibility(const std::vector<FeatureRecord>& train,
                                                 const EvalCorpus& corpus,
                                                 const afp::TrainConfig& train_cfg,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 const RenderSetup& setup,
                                                 const std::vector<double>& grid, Feature feature) {
  if (seeds.size() < 2) throw UsageError("reproducibility: need at least two seeds");
  std::vector<afp::AfpCheckpoint> ckpts(seeds.size());
  parallel_for(seeds.size(), setup.jobs, [&](std::size_t k) {
    afp::TrainConfig cfg = train_cfg;
    cfg.seed = seeds[k];
    try {
      ckpts[k] = afp::afp_train(train, cfg).checkpoint;
    } catch (const NumericalError& e) {
      throw NumericalError("seed " + std::to_string(seeds[k]) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("seed " + std::to_string(seeds[k]) + ": " + e.what());
    }
  });
  RenderSetup inner = setup;
  inner.jobs = seeds.size() > 1 ? 1 : setup.jobs;
  std::vector<ExperimentReport> reports(seeds.size());
  parallel_for(seeds.size(), setup.jobs, [&](std::size_t k) {
    reports[k] = run_disentanglement(corpus, ckpts[k], inner, grid, feature);
  });
  return summarize_reproducibility(std::move(reports));
}

}  // namespace prosoctl::eval
