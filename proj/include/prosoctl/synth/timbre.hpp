// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosoctl/common.hpp"

namespace prosoctl::synth {

struct Formant {
  double center_hz = 500.0;
  double bandwidth_hz = 100.0;
  double gain = 1.0;
  friend bool operator==(const Formant&, const Formant&) = default;
};

struct Timbre {
  bool voiced = true;
  std::vector<Formant> formants;  // at most 3
  friend bool operator==(const Timbre&, const Timbre&) = default;
};

struct TimbreTable {
  std::map<std::string, Timbre> symbols;
  std::optional<Timbre> fallback;

  /// Entry for symbol, or the default; throws when neither exists.
  const Timbre& at(const std::string& symbol) const {
    if (auto it = symbols.find(symbol); it != symbols.end()) return it->second;
    if (fallback) return *fallback;
    throw DataError("synth: symbol '" + symbol + "' has no timbre entry and the table has no default");
  }
  bool voiced(const std::string& symbol) const { return at(symbol).voiced; }

  friend bool operator==(const TimbreTable&, const TimbreTable&) = default;
};

inline void validate_timbre(const Timbre& t, const std::string& name, int sample_rate) {
  if (t.formants.empty() || t.formants.size() > 3)
    throw DataError("timbre '" + name + "': needs 1 to 3 formants");
  for (const auto& f : t.formants) {
    if (!(f.center_hz > 0.0 && f.center_hz < sample_rate / 2.0))
      throw DataError("timbre '" + name + "': formant center must lie in (0, sample_rate/2)");
    if (!(f.bandwidth_hz > 0.0)) throw DataError("timbre '" + name + "': bandwidth must be > 0");
    if (!(f.gain >= 0.0)) throw DataError("timbre '" + name + "': gain must be >= 0");
  }
}

namespace detail {

inline Timbre voiced(std::vector<Formant> f) { return {true, std::move(f)}; }
inline Timbre unvoiced(std::vector<Formant> f) { return {false, std::move(f)}; }

}  // namespace detail

/// Five vowels, nasals, liquids, voiced stops, voiceless obstruents,
/// silence and a neutral default.
inline TimbreTable builtin_timbres() {
  using detail::unvoiced;
  using detail::voiced;
  TimbreTable t;
  t.symbols["a"] = voiced({{730, 90, 1.0}, {1090, 110, 0.5}, {2440, 170, 0.25}});
  t.symbols["e"] = voiced({{530, 60, 1.0}, {1840, 100, 0.45}, {2480, 120, 0.25}});
  t.symbols["i"] = voiced({{270, 60, 1.0}, {2290, 100, 0.4}, {3010, 120, 0.25}});
  t.symbols["o"] = voiced({{570, 70, 1.0}, {840, 80, 0.6}, {2410, 120, 0.2}});
  t.symbols["u"] = voiced({{300, 60, 1.0}, {870, 80, 0.45}, {2240, 120, 0.15}});
  t.symbols["m"] = voiced({{280, 60, 1.0}, {1300, 200, 0.15}, {2500, 300, 0.1}});
  t.symbols["n"] = voiced({{280, 60, 1.0}, {1700, 200, 0.15}, {2600, 300, 0.1}});
  t.symbols["l"] = voiced({{360, 80, 1.0}, {1300, 120, 0.35}, {2700, 200, 0.2}});
  t.symbols["r"] = voiced({{420, 80, 1.0}, {1300, 120, 0.4}, {1600, 150, 0.3}});
  t.symbols["b"] = voiced({{200, 100, 1.0}, {1100, 200, 0.2}, {2200, 300, 0.1}});
  t.symbols["d"] = voiced({{300, 100, 1.0}, {1700, 200, 0.2}, {2600, 300, 0.1}});
  t.symbols["g"] = voiced({{250, 100, 1.0}, {1500, 200, 0.2}, {2500, 300, 0.1}});
  t.symbols["s"] = unvoiced({{4500, 1500, 1.0}, {7000, 2000, 0.6}});
  t.symbols["f"] = unvoiced({{3000, 3000, 1.0}, {6500, 3000, 0.5}});
  t.symbols["x"] = unvoiced({{2500, 1500, 1.0}, {5000, 2000, 0.4}});
  t.symbols["p"] = unvoiced({{1500, 2000, 1.0}, {4000, 2500, 0.4}});
  t.symbols["t"] = unvoiced({{3500, 2000, 1.0}, {6000, 2500, 0.5}});
  t.symbols["k"] = unvoiced({{2000, 1500, 1.0}, {4500, 2500, 0.4}});
  t.symbols["sil"] = unvoiced({{2000, 4000, 1.0}});
  t.fallback = voiced({{500, 100, 1.0}, {1500, 150, 0.4}, {2500, 200, 0.2}});
  return t;
}

inline nlohmann::json to_json(const Timbre& t) {
  nlohmann::json f = nlohmann::json::array();
  for (const auto& x : t.formants)
    f.push_back({{"center_hz", x.center_hz}, {"bandwidth_hz", x.bandwidth_hz}, {"gain", x.gain}});
  return {{"voiced", t.voiced}, {"formants", f}};
}

inline nlohmann::json to_json(const TimbreTable& table) {
  nlohmann::json j;
  j["symbols"] = nlohmann::json::object();
  for (const auto& [name, t] : table.symbols) j["symbols"][name] = to_json(t);
  if (table.fallback) j["default"] = to_json(*table.fallback);
  return j;
}

inline Timbre timbre_from_json(const nlohmann::json& j) {
  Timbre t;
  t.voiced = j.at("voiced").get<bool>();
  for (const auto& f : j.at("formants")) {
    t.formants.push_back({f.at("center_hz").get<double>(), f.at("bandwidth_hz").get<double>(),
                          f.value("gain", 1.0)});
  }
  return t;
}

inline TimbreTable timbre_table_from_json(const nlohmann::json& j, int sample_rate) {
  try {
    TimbreTable table;
    for (const auto& [name, entry] : j.at("symbols").items()) {
      table.symbols[name] = timbre_from_json(entry);
      validate_timbre(table.symbols[name], name, sample_rate);
    }
    if (j.contains("default")) {
      table.fallback = timbre_from_json(j["default"]);
      validate_timbre(*table.fallback, "default", sample_rate);
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("timbre table: ") + e.what());
  }
}

inline TimbreTable load_timbre_table(const std::string& path, int sample_rate) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read timbre table '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return timbre_table_from_json(nlohmann::json::parse(ss.str()), sample_rate);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
}

}  // namespace prosoctl::synth
