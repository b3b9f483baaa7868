// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "prosoctl/common.hpp"
#include "prosoctl/corpus/phone.hpp"
#include "prosoctl/features/features.hpp"

namespace prosoctl::control {

using corpus::PhoneToken;
using features::SpeakerStats;

struct AllPhones {
  friend bool operator==(const AllPhones&, const AllPhones&) = default;
};
struct PhoneIndices {
  std::set<std::size_t> indices;
  friend bool operator==(const PhoneIndices&, const PhoneIndices&) = default;
};
struct StressedVowelsRandom {
  double fraction = 1.0;
  std::uint64_t seed = 0;
  friend bool operator==(const StressedVowelsRandom&, const StressedVowelsRandom&) = default;
};
using Selector = std::variant<AllPhones, PhoneIndices, StressedVowelsRandom>;

struct ShiftSigma {
  double k = 0.0;
  friend bool operator==(const ShiftSigma&, const ShiftSigma&) = default;
};
struct SetNormalized {
  double value = 0.0;
  friend bool operator==(const SetNormalized&, const SetNormalized&) = default;
};
struct ScaleRaw {
  double factor = 1.0;
  friend bool operator==(const ScaleRaw&, const ScaleRaw&) = default;
};
using Action = std::variant<ShiftSigma, SetNormalized, ScaleRaw>;

struct EditOp {
  Selector selector;
  Feature feature = Feature::f0;
  Action action;
  friend bool operator==(const EditOp&, const EditOp&) = default;
};

struct EditScript {
  std::vector<EditOp> ops;
  std::string author;
  std::string note;
  friend bool operator==(const EditScript&, const EditScript&) = default;
};

/// Stressed vowel tokens, in sequence order.
inline std::vector<std::size_t> stressed_vowels(const std::vector<PhoneToken>& phones) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < phones.size(); ++i) {
    const auto& p = phones[i];
    if (!p.is_boundary() && p.stressed && corpus::is_vowel(p.symbol)) out.push_back(i);
  }
  return out;
}

/// max(1, round(fraction * count)) stressed vowels chosen by a seeded shuffle.
inline std::set<std::size_t> select_stressed_vowel_subset(const std::vector<PhoneToken>& phones,
                                                          double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw DataError("stressed vowel subset: fraction must lie in (0, 1]");
  auto candidates = stressed_vowels(phones);
  if (candidates.empty()) throw DataError("stressed vowel subset: utterance has no stressed vowels");
  const auto count = static_cast<double>(candidates.size());
  const std::size_t take = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * count)));
  Rng rng(derive_seed(seed, "control:stressed_vowels"));
  rng.shuffle(candidates);
  return {candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take)};
}

/// Indices a selector resolves to. Boundary tokens are excluded.
inline std::set<std::size_t> resolve_selector(const Selector& selector,
                                              const std::vector<PhoneToken>& phones) {
  std::set<std::size_t> out;
  if (std::holds_alternative<AllPhones>(selector)) {
    for (std::size_t i = 0; i < phones.size(); ++i)
      if (!phones[i].is_boundary()) out.insert(i);
  } else if (const auto* idx = std::get_if<PhoneIndices>(&selector)) {
    for (std::size_t i : idx->indices) {
      if (i >= phones.size())
        throw DataError("edit: phone index " + std::to_string(i) + " out of range (utterance has " +
                        std::to_string(phones.size()) + " tokens)");
      if (!phones[i].is_boundary()) out.insert(i);
    }
  } else {
    const auto& s = std::get<StressedVowelsRandom>(selector);
    out = select_stressed_vowel_subset(phones, s.fraction, s.seed);
  }
  return out;
}

/// Smallest normalized duration whose denormalized value is one frame.
inline double min_normalized_duration(const SpeakerStats& stats) {
  return (1.0 - stats.duration.mean) / features::scale_of(stats.duration);
}

inline double apply_action(const Action& action, Feature feature, double z,
                           const SpeakerStats& stats) {
  double out = z;
  if (const auto* s = std::get_if<ShiftSigma>(&action)) {
    out = z + s->k;
  } else if (const auto* v = std::get_if<SetNormalized>(&action)) {
    out = v->value;
  } else {
    const double raw = features::denormalize_value(feature, z, stats);
    out = features::normalize_value(feature, raw * std::get<ScaleRaw>(action).factor, stats);
  }
  if (feature == Feature::duration) out = std::max(out, min_normalized_duration(stats));
  return out;
}

inline void validate_op(const EditOp& op) {
  if (const auto* s = std::get_if<StressedVowelsRandom>(&op.selector)) {
    if (!(s->fraction > 0.0 && s->fraction <= 1.0))
      throw DataError("edit: stressed_vowels_random fraction must lie in (0, 1]");
  }
  const double value = std::visit(
      [](const auto& a) -> double {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, ShiftSigma>) return a.k;
        else if constexpr (std::is_same_v<A, SetNormalized>) return a.value;
        else return a.factor;
      },
      op.action);
  if (!std::isfinite(value)) throw DataError("edit: action value must be finite");
  if (const auto* s = std::get_if<ScaleRaw>(&op.action); s && !(s->factor >= 0.0))
    throw DataError("edit: scale_raw factor must be >= 0");
}

/// Applies the script in order. Tokens outside every selector, boundary
/// tokens and untouched features are copied bit for bit.
inline std::vector<AcousticFeatureVector> apply_edits(
    const std::vector<AcousticFeatureVector>& normalized, const EditScript& script,
    const std::vector<PhoneToken>& phones, const SpeakerStats& stats) {
  if (normalized.size() != phones.size())
    throw DataError("edit: feature count " + std::to_string(normalized.size()) +
                    " does not match phone count " + std::to_string(phones.size()));
  for (const auto& v : normalized)
    if (v.space != FeatureSpace::normalized) throw DataError("edit: features must be normalized");
  std::vector<AcousticFeatureVector> out = normalized;
  for (const auto& op : script.ops) {
    validate_op(op);
    for (std::size_t i : resolve_selector(op.selector, phones)) {
      double& slot = out[i][op.feature];
      slot = apply_action(op.action, op.feature, slot, stats);
    }
  }
  return out;
}

/// Convenience: one shift_sigma over every phone.
inline EditScript shift_all(Feature feature, double k) {
  EditScript s;
  s.ops.push_back({AllPhones{}, feature, ShiftSigma{k}});
  return s;
}

// JSON form.

inline nlohmann::json to_json(const EditOp& op) {
  nlohmann::json j;
  if (std::holds_alternative<AllPhones>(op.selector)) {
    j["selector"] = "all_phones";
  } else if (const auto* idx = std::get_if<PhoneIndices>(&op.selector)) {
    j["selector"] = {{"phone_indices", std::vector<std::size_t>(idx->indices.begin(), idx->indices.end())}};
  } else {
    const auto& s = std::get<StressedVowelsRandom>(op.selector);
    j["selector"] = {{"stressed_vowels_random", {{"fraction", s.fraction}, {"seed", s.seed}}}};
  }
  j["feature"] = to_string(op.feature);
  if (const auto* s = std::get_if<ShiftSigma>(&op.action)) {
    j["action"] = {{"shift_sigma", s->k}};
  } else if (const auto* v = std::get_if<SetNormalized>(&op.action)) {
    j["action"] = {{"set_normalized", v->value}};
  } else {
    j["action"] = {{"scale_raw", std::get<ScaleRaw>(op.action).factor}};
  }
  return j;
}

inline nlohmann::json to_json(const EditScript& script) {
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& op : script.ops) ops.push_back(to_json(op));
  return {{"ops", ops}, {"meta", {{"author", script.author}, {"note", script.note}}}};
}

inline std::optional<Feature> feature_from_string(const std::string& s) {
  for (Feature f : kAllFeatures)
    if (to_string(f) == s) return f;
  return std::nullopt;
}

inline EditOp edit_op_from_json(const nlohmann::json& j, const std::string& where) {
  const auto fail = [&](const std::string& msg) { return DataError(where + ": " + msg); };
  if (!j.is_object()) throw fail("edit op must be an object");
  for (const auto& [key, _] : j.items())
    if (key != "selector" && key != "feature" && key != "action") throw fail("unknown field '" + key + "'");
  EditOp op;
  const auto& sel = j.at("selector");
  if (sel.is_string()) {
    if (sel.get<std::string>() != "all_phones") throw fail("unknown selector '" + sel.get<std::string>() + "'");
    op.selector = AllPhones{};
  } else if (sel.is_object() && sel.size() == 1 && sel.contains("phone_indices")) {
    PhoneIndices p;
    for (const auto& v : sel["phone_indices"]) {
      if (!v.is_number_unsigned()) throw fail("phone_indices must be non-negative integers");
      p.indices.insert(v.get<std::size_t>());
    }
    op.selector = p;
  } else if (sel.is_object() && sel.size() == 1 && sel.contains("stressed_vowels_random")) {
    const auto& s = sel["stressed_vowels_random"];
    op.selector = StressedVowelsRandom{s.at("fraction").get<double>(), s.at("seed").get<std::uint64_t>()};
  } else {
    throw fail("selector must be \"all_phones\", {\"phone_indices\": [...]} or {\"stressed_vowels_random\": {...}}");
  }
  const auto name = j.at("feature").get<std::string>();
  const auto f = feature_from_string(name);
  if (!f) throw fail("unknown feature '" + name + "'");
  op.feature = *f;
  const auto& act = j.at("action");
  if (!act.is_object() || act.size() != 1) throw fail("action must hold exactly one entry");
  const auto& [kind, value] = *act.items().begin();
  if (!value.is_number()) throw fail("action value must be a number");
  const double v = value.get<double>();
  if (kind == "shift_sigma") op.action = ShiftSigma{v};
  else if (kind == "set_normalized") op.action = SetNormalized{v};
  else if (kind == "scale_raw") op.action = ScaleRaw{v};
  else throw fail("unknown action '" + kind + "'");
  validate_op(op);
  return op;
}

inline EditScript edit_script_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("ops") || !j["ops"].is_array())
      throw DataError("edit script: expected an object with an \"ops\" array");
    EditScript s;
    for (std::size_t i = 0; i < j["ops"].size(); ++i)
      s.ops.push_back(edit_op_from_json(j["ops"][i], "ops[" + std::to_string(i) + "]"));
    if (j.contains("meta")) {
      s.author = j["meta"].value("author", "");
      s.note = j["meta"].value("note", "");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("edit script: ") + e.what());
  }
}

inline EditScript parse_edit_script(const std::string& text) {
  try {
    return edit_script_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("edit script: invalid JSON: ") + e.what());
  }
}

}  // namespace prosoctl::control
