// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosoctl/common.hpp"
#include "prosoctl/corpus/phone.hpp"

namespace prosoctl::corpus {

// Alignment document, one utterance per file:
// {"utterance_id": str, "speaker_id": str, "sample_rate": int, "hop": int,
//  "audio_path": str?, "phones": [{"symbol": str,
//   "kind": "phone"|"word_boundary"|"sentence_boundary", "stressed": bool,
//   "start_frame": int?, "end_frame": int?}]}
// Frame indices live on the analysis grid (hop samples per frame).

namespace detail {

// Line numbers of top-level keys and of each object in the "phones" array,
// recovered from the raw text so schema errors can point at a line.
struct SourceLines {
  std::map<std::string, int> top_level_keys;
  std::vector<int> phone_objects;
};

inline SourceLines scan_source_lines(const std::string& text) {
  SourceLines out;
  std::vector<char> stack;
  int line = 1;
  std::string last_string;
  int last_string_line = 1;
  bool awaiting_value = false;
  std::size_t phones_depth = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      continue;
    }
    if (c == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        if (text[i] == '\n') ++line;
        s.push_back(text[i]);
      }
      last_string = s;
      last_string_line = line;
      continue;
    }
    if (c == ':') {
      if (stack.size() == 1) out.top_level_keys.emplace(last_string, last_string_line);
      awaiting_value = true;
      continue;
    }
    if (c == '{' || c == '[') {
      if (c == '[' && stack.size() == 1 && awaiting_value && last_string == "phones") {
        phones_depth = stack.size() + 1;
      }
      if (c == '{' && phones_depth != 0 && stack.size() == phones_depth) {
        out.phone_objects.push_back(line);
      }
      stack.push_back(c);
      awaiting_value = false;
      continue;
    }
    if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
      if (stack.size() + 1 == phones_depth && c == ']') phones_depth = 0;
      continue;
    }
    if (c == ',') awaiting_value = false;
  }
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const Utterance& utt) {
  nlohmann::json j;
  j["utterance_id"] = utt.utterance_id;
  j["speaker_id"] = utt.speaker_id;
  j["sample_rate"] = utt.sample_rate;
  j["hop"] = utt.hop;
  if (utt.audio_path) j["audio_path"] = *utt.audio_path;
  j["phones"] = nlohmann::json::array();
  for (const auto& p : utt.phones) {
    nlohmann::json pj{{"symbol", p.symbol}, {"kind", to_string(p.kind)}, {"stressed", p.stressed}};
    if (p.span) {
      pj["start_frame"] = p.span->start_frame;
      pj["end_frame"] = p.span->end_frame;
    }
    j["phones"].push_back(std::move(pj));
  }
  return j;
}

/// Parses an alignment document. Errors name the source, line and field.
inline Utterance parse_alignment(const std::string& text, const std::string& source = "<alignment>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(source + ": invalid JSON: " + e.what());
  }
  const auto lines = detail::scan_source_lines(text);
  const auto top_line = [&](const std::string& key) {
    const auto it = lines.top_level_keys.find(key);
    return it == lines.top_level_keys.end() ? 1 : it->second;
  };
  const auto fail = [&](int line, const std::string& field, const std::string& what) {
    throw DataError(source + ":" + std::to_string(line) + ": field '" + field + "': " + what);
  };
  if (!j.is_object()) fail(1, "<root>", "expected an object");
  for (const auto& [key, _] : j.items()) {
    static const char* kKnown[] = {"utterance_id", "speaker_id", "sample_rate", "hop",
                                   "phones",       "audio_path"};
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      fail(top_line(key), key, "unknown field");
    }
  }
  const auto require_string = [&](const std::string& key) {
    if (!j.contains(key)) fail(1, key, "missing");
    if (!j[key].is_string() || j[key].get<std::string>().empty()) {
      fail(top_line(key), key, "expected a non-empty string");
    }
    return j[key].get<std::string>();
  };
  const auto require_positive = [&](const std::string& key) {
    if (!j.contains(key)) fail(1, key, "missing");
    if (!j[key].is_number_integer() || j[key].get<long long>() <= 0) {
      fail(top_line(key), key, "expected a positive integer");
    }
    return static_cast<int>(j[key].get<long long>());
  };

  Utterance utt;
  utt.utterance_id = require_string("utterance_id");
  utt.speaker_id = require_string("speaker_id");
  utt.sample_rate = require_positive("sample_rate");
  utt.hop = require_positive("hop");
  if (j.contains("audio_path")) {
    if (!j["audio_path"].is_string()) fail(top_line("audio_path"), "audio_path", "expected a string");
    utt.audio_path = j["audio_path"].get<std::string>();
  }
  if (!j.contains("phones")) fail(1, "phones", "missing");
  if (!j["phones"].is_array()) fail(top_line("phones"), "phones", "expected an array");

  std::optional<std::size_t> prev_end;
  const auto& phones = j["phones"];
  for (std::size_t i = 0; i < phones.size(); ++i) {
    const auto& pj = phones[i];
    const int line = i < lines.phone_objects.size() ? lines.phone_objects[i] : top_line("phones");
    const std::string prefix = "phones[" + std::to_string(i) + "]";
    if (!pj.is_object()) fail(line, prefix, "expected an object");
    for (const auto& [key, _] : pj.items()) {
      if (key != "symbol" && key != "kind" && key != "stressed" && key != "start_frame" &&
          key != "end_frame") {
        fail(line, prefix + "." + key, "unknown field");
      }
    }
    PhoneToken tok;
    if (!pj.contains("symbol") || !pj["symbol"].is_string() || pj["symbol"].get<std::string>().empty()) {
      fail(line, prefix + ".symbol", "expected a non-empty string");
    }
    tok.symbol = pj["symbol"].get<std::string>();
    if (!pj.contains("kind") || !pj["kind"].is_string()) fail(line, prefix + ".kind", "expected a string");
    const auto kind = phone_kind_from_string(pj["kind"].get<std::string>());
    if (!kind) fail(line, prefix + ".kind", "expected one of phone|word_boundary|sentence_boundary");
    tok.kind = *kind;
    if (!pj.contains("stressed") || !pj["stressed"].is_boolean()) {
      fail(line, prefix + ".stressed", "expected a boolean");
    }
    tok.stressed = pj["stressed"].get<bool>();
    const bool has_start = pj.contains("start_frame");
    const bool has_end = pj.contains("end_frame");
    if (has_start != has_end) fail(line, prefix, "start_frame and end_frame must appear together");
    if (tok.is_boundary()) {
      if (has_start) fail(line, prefix, "boundary token must not carry span");
      if (tok.stressed) fail(line, prefix + ".stressed", "boundary token must not be stressed");
    }
    if (has_start) {
      for (const char* key : {"start_frame", "end_frame"}) {
        if (!pj[key].is_number_integer() || pj[key].get<long long>() < 0) {
          fail(line, prefix + "." + key, "expected a non-negative integer");
        }
      }
      AlignmentSpan span{static_cast<std::size_t>(pj["start_frame"].get<long long>()),
                         static_cast<std::size_t>(pj["end_frame"].get<long long>())};
      if (span.end_frame < span.start_frame) fail(line, prefix + ".end_frame", "end_frame < start_frame");
      if (prev_end && span.start_frame <= *prev_end) {
        fail(line, prefix + ".start_frame", "span overlaps the previous phone");
      }
      prev_end = span.end_frame;
      tok.span = span;
    }
    utt.phones.push_back(std::move(tok));
  }
  try {
    validate_utterance(utt);
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
  return utt;
}

inline Utterance load_alignment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open alignment file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_alignment(ss.str(), path);
}

inline std::string print_alignment(const Utterance& utt) { return to_json(utt).dump(2) + "\n"; }

inline void save_alignment(const std::string& path, const Utterance& utt) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write alignment file " + path);
  out << print_alignment(utt);
}

/// CTM-style phone lines "<utt> <channel> <start_s> <dur_s> <phone> [conf]"
/// converted to alignment documents. Symbols ending in '1' are stressed.
inline std::vector<Utterance> parse_ctm(const std::string& text, const std::string& speaker_id,
                                        int sample_rate = dsp::kDefaultSampleRate,
                                        int hop = dsp::kDefaultHop) {
  std::vector<Utterance> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    std::istringstream ls(line);
    std::string utt_id, channel, symbol;
    double start = 0.0, dur = 0.0;
    if (!(ls >> utt_id >> channel >> start >> dur >> symbol) || start < 0.0 || dur <= 0.0) {
      throw DataError("ctm:" + std::to_string(lineno) + ": expected '<utt> <chan> <start> <dur> <phone>'");
    }
    if (out.empty() || out.back().utterance_id != utt_id) {
      Utterance u;
      u.utterance_id = utt_id;
      u.speaker_id = speaker_id;
      u.sample_rate = sample_rate;
      u.hop = hop;
      out.push_back(std::move(u));
    }
    const double frames_per_second = static_cast<double>(sample_rate) / hop;
    const auto begin = static_cast<std::size_t>(std::llround(start * frames_per_second));
    auto end = static_cast<std::size_t>(std::llround((start + dur) * frames_per_second));
    if (end <= begin) end = begin + 1;
    PhoneToken tok;
    tok.symbol = symbol;
    tok.stressed = symbol.size() > 1 && symbol.back() == '1';
    tok.span = AlignmentSpan{begin, end - 1};
    out.back().phones.push_back(std::move(tok));
  }
  for (const auto& u : out) validate_utterance(u);
  return out;
}

}  // namespace prosoctl::corpus
