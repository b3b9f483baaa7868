// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "prosoctl/corpus/alignment.hpp"
#include "prosoctl/corpus/feature_store.hpp"
#include "prosoctl/corpus/phone.hpp"
#include "prosoctl/corpus/split.hpp"

namespace prosoctl::corpus {

// Every *.json alignment document in `dir`, sorted by utterance_id.
inline std::vector<Utterance> load_alignment_dir(const std::string& dir) {
  std::vector<Utterance> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() != ".json" || name.ends_with(".features.json")) continue;
    out.push_back(load_alignment(entry.path().string()));
  }
  std::sort(out.begin(), out.end(),
            [](const Utterance& a, const Utterance& b) { return a.utterance_id < b.utterance_id; });
  return out;
}

}  // namespace prosoctl::corpus
