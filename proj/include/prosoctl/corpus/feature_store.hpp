// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosoctl/common.hpp"
#include "prosoctl/corpus/phone.hpp"
#include "prosoctl/features/vector.hpp"

namespace prosoctl::corpus {

inline constexpr int kFeatureRecordFormat = 1;

/// Per-phone features of one utterance. `normalized` is empty until speaker
/// statistics have been applied; `stats_version` names those statistics.
struct FeatureRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::vector<PhoneToken> phones;  // spans are not persisted
  std::vector<AcousticFeatureVector> raw;
  std::vector<AcousticFeatureVector> normalized;
  std::string stats_version;

  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

inline void validate_record(const FeatureRecord& r) {
  const std::string where = "feature record " + r.utterance_id;
  if (r.utterance_id.empty() || r.speaker_id.empty()) throw DataError(where + ": empty id");
  if (r.raw.size() != r.phones.size()) throw DataError(where + ": raw length != phone count");
  if (!r.normalized.empty() && r.normalized.size() != r.phones.size()) {
    throw DataError(where + ": normalized length != phone count");
  }
  for (const auto* seq : {&r.raw, &r.normalized}) {
    for (const auto& v : *seq) {
      if (!std::isfinite(v.f0) || !std::isfinite(v.energy) || !std::isfinite(v.duration)) {
        throw DataError(where + ": non-finite feature value");
      }
    }
  }
}

namespace detail {

inline nlohmann::json vectors_to_json(const std::vector<AcousticFeatureVector>& seq) {
  auto arr = nlohmann::json::array();
  for (const auto& v : seq) arr.push_back({v.f0, v.energy, v.duration});
  return arr;
}

inline std::vector<AcousticFeatureVector> vectors_from_json(const nlohmann::json& arr,
                                                            FeatureSpace space) {
  std::vector<AcousticFeatureVector> out;
  for (const auto& row : arr) {
    if (!row.is_array() || row.size() != 3) throw DataError("feature record: bad vector");
    out.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>(), space});
  }
  return out;
}

inline nlohmann::json record_payload(const FeatureRecord& r) {
  nlohmann::json p;
  p["utterance_id"] = r.utterance_id;
  p["speaker_id"] = r.speaker_id;
  p["stats_version"] = r.stats_version;
  p["phones"] = nlohmann::json::array();
  for (const auto& t : r.phones) {
    p["phones"].push_back({{"symbol", t.symbol}, {"kind", to_string(t.kind)}, {"stressed", t.stressed}});
  }
  p["raw"] = vectors_to_json(r.raw);
  p["normalized"] = vectors_to_json(r.normalized);
  return p;
}

}  // namespace detail

inline std::string serialize_record(const FeatureRecord& r) {
  validate_record(r);
  const auto payload = detail::record_payload(r);
  nlohmann::json doc;
  doc["format_version"] = kFeatureRecordFormat;
  doc["checksum"] = to_hex(fnv1a64(payload.dump()));
  doc["payload"] = payload;
  return doc.dump(1) + "\n";
}

/// Parses a stored record. Fails with IntegrityError when the payload does
/// not match its checksum and with VersionError when `expected_stats_version`
/// is given and differs from the record's.
inline FeatureRecord deserialize_record(const std::string& text, const std::string& source,
                                        const std::optional<std::string>& expected_stats_version = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IntegrityError(source + ": corrupt feature record: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version") || !doc.contains("payload") ||
      !doc.contains("checksum")) {
    throw DataError(source + ": not a feature record");
  }
  if (doc["format_version"] != kFeatureRecordFormat) {
    throw VersionError(source + ": unsupported format_version " + doc["format_version"].dump());
  }
  const auto& payload = doc["payload"];
  if (to_hex(fnv1a64(payload.dump())) != doc["checksum"].get<std::string>()) {
    throw IntegrityError(source + ": checksum mismatch, record is corrupt");
  }
  FeatureRecord r;
  try {
    r.utterance_id = payload.at("utterance_id").get<std::string>();
    r.speaker_id = payload.at("speaker_id").get<std::string>();
    r.stats_version = payload.at("stats_version").get<std::string>();
    for (const auto& pj : payload.at("phones")) {
      PhoneToken t;
      t.symbol = pj.at("symbol").get<std::string>();
      const auto kind = phone_kind_from_string(pj.at("kind").get<std::string>());
      if (!kind) throw DataError("bad kind");
      t.kind = *kind;
      t.stressed = pj.at("stressed").get<bool>();
      r.phones.push_back(std::move(t));
    }
    r.raw = detail::vectors_from_json(payload.at("raw"), FeatureSpace::raw);
    r.normalized = detail::vectors_from_json(payload.at("normalized"), FeatureSpace::normalized);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": malformed feature record: " + e.what());
  }
  if (expected_stats_version && r.stats_version != *expected_stats_version) {
    throw VersionError(source + ": stats_version '" + r.stats_version + "' does not match current '" +
                       *expected_stats_version + "'");
  }
  validate_record(r);
  return r;
}

inline std::string record_filename(const std::string& utterance_id) {
  return utterance_id + ".features.json";
}

// Writes via a temporary file and rename, so readers never see a partial
// record. One writer per file.
inline void store_feature_record(const std::string& path, const FeatureRecord& r) {
  const std::string text = serialize_record(r);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp);
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

inline FeatureRecord load_feature_record(const std::string& path,
                                         const std::optional<std::string>& expected_stats_version = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature record " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_record(ss.str(), path, expected_stats_version);
}

inline std::vector<FeatureRecord> load_feature_dir(const std::string& dir,
                                                   const std::optional<std::string>& expected_stats_version = {}) {
  std::vector<std::string> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.size() > 14 && name.ends_with(".features.json")) paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<FeatureRecord> out;
  for (const auto& p : paths) out.push_back(load_feature_record(p, expected_stats_version));
  return out;
}

}  // namespace prosoctl::corpus
