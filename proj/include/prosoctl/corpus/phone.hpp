// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "prosoctl/common.hpp"
#include "prosoctl/dsp/audio.hpp"

namespace prosoctl::corpus {

enum class PhoneKind { phone, word_boundary, sentence_boundary };

inline std::string to_string(PhoneKind k) {
  switch (k) {
    case PhoneKind::phone: return "phone";
    case PhoneKind::word_boundary: return "word_boundary";
    case PhoneKind::sentence_boundary: return "sentence_boundary";
  }
  return "?";
}

inline std::optional<PhoneKind> phone_kind_from_string(const std::string& s) {
  if (s == "phone") return PhoneKind::phone;
  if (s == "word_boundary") return PhoneKind::word_boundary;
  if (s == "sentence_boundary") return PhoneKind::sentence_boundary;
  return std::nullopt;
}

// Inclusive frame range [start_frame, end_frame].
struct AlignmentSpan {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;

  std::size_t length() const { return end_frame - start_frame + 1; }
  friend bool operator==(const AlignmentSpan&, const AlignmentSpan&) = default;
};

struct PhoneToken {
  std::string symbol;
  PhoneKind kind = PhoneKind::phone;
  bool stressed = false;
  std::optional<AlignmentSpan> span;

  bool is_boundary() const { return kind != PhoneKind::phone; }
  friend bool operator==(const PhoneToken&, const PhoneToken&) = default;
};

// Vowels are symbols starting with a vowel letter (a, e, i, o, u), which
// covers both plain ("a") and ARPAbet-style ("AH1") inventories.
inline bool is_vowel(const std::string& symbol) {
  if (symbol.empty()) return false;
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(symbol[0])));
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

struct Utterance {
  std::string utterance_id;
  std::string speaker_id;
  std::vector<PhoneToken> phones;
  std::optional<std::string> audio_path;
  int sample_rate = dsp::kDefaultSampleRate;
  int hop = dsp::kDefaultHop;

  bool aligned() const {
    for (const auto& p : phones) {
      if (!p.is_boundary()) return p.span.has_value();
    }
    return false;
  }

  // One past the last aligned frame.
  std::size_t aligned_frames() const {
    std::size_t n = 0;
    for (const auto& p : phones) {
      if (p.span) n = std::max(n, p.span->end_frame + 1);
    }
    return n;
  }

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

/// Checks the token and span invariants; throws DataError naming the phone.
inline void validate_utterance(const Utterance& utt) {
  if (utt.utterance_id.empty()) throw DataError("utterance: empty utterance_id");
  if (utt.speaker_id.empty()) {
    throw DataError("utterance " + utt.utterance_id + ": empty speaker_id");
  }
  if (utt.sample_rate <= 0 || utt.hop <= 0) {
    throw DataError("utterance " + utt.utterance_id + ": sample_rate and hop must be positive");
  }
  bool any_span = false, any_missing = false;
  std::optional<std::size_t> prev_end;
  for (std::size_t i = 0; i < utt.phones.size(); ++i) {
    const auto& p = utt.phones[i];
    const std::string where = "utterance " + utt.utterance_id + " phone " + std::to_string(i);
    if (p.symbol.empty()) throw DataError(where + ": empty symbol");
    if (p.is_boundary()) {
      if (p.span) throw DataError(where + ": boundary token must not carry span");
      if (p.stressed) throw DataError(where + ": boundary token must not be stressed");
      continue;
    }
    if (!p.span) {
      any_missing = true;
      continue;
    }
    any_span = true;
    if (p.span->end_frame < p.span->start_frame) {
      throw DataError(where + ": end_frame < start_frame");
    }
    if (prev_end && p.span->start_frame <= *prev_end) {
      throw DataError(where + ": span overlaps or precedes the previous phone");
    }
    prev_end = p.span->end_frame;
  }
  if (any_span && any_missing) {
    throw DataError("utterance " + utt.utterance_id + ": some phones aligned, others not");
  }
}

}  // namespace prosoctl::corpus
