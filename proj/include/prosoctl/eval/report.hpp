// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdio>
#include <string>

#include "json.hpp"
#include "prosoctl/eval/experiments.hpp"

namespace prosoctl::eval {

inline Feature feature_from_string(const std::string& s) {
  for (Feature f : kAllFeatures)
    if (to_string(f) == s) return f;
  throw UsageError("unknown feature '" + s + "' (expected f0, energy or duration)");
}

inline nlohmann::json to_json(const MeasureStats& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"max_abs", s.max_abs}, {"n", s.n}};
}

inline MeasureStats measure_stats_from_json(const nlohmann::json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("max_abs").get<double>(),
          j.at("n").get<std::size_t>()};
}

inline nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : r.levels) {
    nlohmann::json groups = nlohmann::json::object();
    for (const auto& [name, stats] : l.groups) {
      nlohmann::json g = nlohmann::json::object();
      for (Feature f : kAllFeatures) g[to_string(f)] = to_json(stats[static_cast<int>(f)]);
      groups[name] = g;
    }
    levels.push_back({{"shift", l.shift},
                      {"flagged", l.flagged},
                      {"clamped_phones", l.clamped_phones},
                      {"groups", groups}});
  }
  return {{"kind", r.kind},
          {"edited_feature", to_string(r.edited)},
          {"grid", r.grid},
          {"seeds", r.seeds},
          {"utterances", r.utterance_ids},
          {"config", r.config},
          {"levels", levels}};
}

inline ExperimentReport experiment_report_from_json(const nlohmann::json& j) {
  try {
    ExperimentReport r;
    r.kind = j.at("kind").get<std::string>();
    r.edited = feature_from_string(j.at("edited_feature").get<std::string>());
    r.grid = j.at("grid").get<std::vector<double>>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.utterance_ids = j.at("utterances").get<std::vector<std::string>>();
    r.config = j.at("config");
    for (const auto& lj : j.at("levels")) {
      LevelReport l;
      l.shift = lj.at("shift").get<double>();
      l.flagged = lj.at("flagged").get<bool>();
      l.clamped_phones = lj.at("clamped_phones").get<std::size_t>();
      for (const auto& [name, gj] : lj.at("groups").items()) {
        GroupStats g;
        for (Feature f : kAllFeatures) g[static_cast<int>(f)] = measure_stats_from_json(gj.at(to_string(f)));
        l.groups[name] = g;
      }
      r.levels.push_back(std::move(l));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("experiment report: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("experiment report: ") + e.what());
  }
}

/// Flat rows: shift, measured_feature, group, mean, std.
inline std::string to_csv(const ExperimentReport& r) {
  std::string out = "shift,measured_feature,group,mean,std\n";
  char buf[160];
  for (const auto& l : r.levels) {
    for (const auto& [name, stats] : l.groups) {
      for (Feature f : kAllFeatures) {
        const auto& s = stats[static_cast<int>(f)];
        std::snprintf(buf, sizeof(buf), "%.17g,%s,%s,%.17g,%.17g\n", l.shift, to_string(f).c_str(),
                      name.c_str(), s.mean, s.std);
        out += buf;
      }
    }
  }
  return out;
}

inline nlohmann::json to_json(const ReproducibilityReport& r) {
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& rep : r.per_seed) per_seed.push_back(to_json(rep));
  nlohmann::json divergence = nlohmann::json::array();
  for (std::size_t g = 0; g < r.divergence.size(); ++g) {
    nlohmann::json row = {{"shift", r.per_seed.front().grid[g]}};
    for (Feature f : kAllFeatures) row[to_string(f)] = r.divergence[g][static_cast<int>(f)];
    divergence.push_back(row);
  }
  return {{"kind", "reproducibility"},
          {"signs_agree", r.signs_agree},
          {"all_monotone", r.all_monotone},
          {"divergence", divergence},
          {"per_seed", per_seed}};
}

}  // namespace prosoctl::eval
