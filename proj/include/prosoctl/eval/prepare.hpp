// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <map>
#include <string>
#include <vector>

#include "prosoctl/corpus/split.hpp"
#include "prosoctl/features/pipeline.hpp"
#include "prosoctl/synth/corpus_generator.hpp"

namespace prosoctl::eval {

/// Normalized train/validation records and the statistics behind them.
struct PreparedCorpus {
  std::vector<corpus::FeatureRecord> train;
  std::vector<corpus::FeatureRecord> validation;
  features::StatsTable stats;

  std::vector<corpus::FeatureRecord> all() const {
    auto out = train;
    out.insert(out.end(), validation.begin(), validation.end());
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.utterance_id < b.utterance_id; });
    return out;
  }
};

/// Splits raw records per speaker, fits statistics on the training part
/// and normalizes both parts. With holdout 0 everything is training data.
inline PreparedCorpus prepare_records(std::vector<corpus::FeatureRecord> raw, double holdout,
                                      std::uint64_t seed) {
  if (raw.empty()) throw DataError("prepare: no records");
  std::map<std::string, corpus::FeatureRecord> by_id;
  std::vector<corpus::UtteranceRef> refs;
  for (auto& r : raw) {
    refs.push_back({r.utterance_id, r.speaker_id});
    if (!by_id.emplace(r.utterance_id, std::move(r)).second)
      throw DataError("prepare: duplicate utterance_id");
  }
  PreparedCorpus out;
  if (holdout > 0.0) {
    const auto split = corpus::split_corpus(refs, holdout, derive_seed(seed, "split"));
    for (const auto& id : split.train) out.train.push_back(by_id.at(id));
    for (const auto& id : split.validation) out.validation.push_back(by_id.at(id));
  } else {
    for (auto& [_, r] : by_id) out.train.push_back(r);
  }
  out.stats = features::build_stats_table(out.train);
  for (auto& r : out.train) features::normalize_record(r, out.stats);
  for (auto& r : out.validation) features::normalize_record(r, out.stats);
  return out;
}

/// Re-analyzes generated audio so records hold measured, not target, values.
inline std::vector<corpus::FeatureRecord> records_from_generated(
    const std::vector<synth::GeneratedUtterance>& gen, const features::AnalysisConfig& analysis,
    unsigned jobs = 1) {
  std::vector<corpus::FeatureRecord> out(gen.size());
  parallel_for(gen.size(), jobs, [&](std::size_t i) {
    out[i] = features::extract_record(gen[i].audio, gen[i].utterance, analysis);
  });
  return out;
}

}  // namespace prosoctl::eval
