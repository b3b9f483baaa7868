// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "prosoctl/common.hpp"

namespace prosoctl::corpus {

struct UtteranceRef {
  std::string utterance_id;
  std::string speaker_id;
};

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

/// Holds out round(fraction * n_s) utterances of every speaker s (capped at
/// n_s - 1 so each speaker keeps training data). Both lists come back sorted.
inline CorpusSplit split_corpus(const std::vector<UtteranceRef>& utterances,
                                double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw DataError("split: holdout_fraction must be in [0, 1)");
  }
  std::map<std::string, std::vector<std::string>> by_speaker;
  for (const auto& u : utterances) by_speaker[u.speaker_id].push_back(u.utterance_id);
  CorpusSplit split;
  for (auto& [speaker, ids] : by_speaker) {
    if (ids.size() < 2) {
      throw DataError("split: speaker " + speaker + " has only one utterance");
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw DataError("split: duplicate utterance_id for speaker " + speaker);
    }
    auto n_hold = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(ids.size())));
    n_hold = std::min(n_hold, ids.size() - 1);
    Rng rng(derive_seed(seed, "split:" + speaker));
    rng.shuffle(ids);
    split.validation.insert(split.validation.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_hold));
    split.train.insert(split.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_hold), ids.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

}  // namespace prosoctl::corpus
