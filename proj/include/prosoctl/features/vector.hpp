// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace prosoctl {

enum class FeatureSpace { raw, normalized };

enum class Feature { f0, energy, duration };

inline constexpr std::array<Feature, 3> kAllFeatures{Feature::f0, Feature::energy,
                                                     Feature::duration};

inline std::string to_string(Feature f) {
  switch (f) {
    case Feature::f0: return "f0";
    case Feature::energy: return "energy";
    case Feature::duration: return "duration";
  }
  return "?";
}

inline std::string to_string(FeatureSpace s) {
  return s == FeatureSpace::raw ? "raw" : "normalized";
}

/// One phone's (F0, energy, duration). Raw units are Hz, RMS and frames;
/// normalized values are per-speaker z-scores.
struct AcousticFeatureVector {
  double f0 = 0.0;
  double energy = 0.0;
  double duration = 0.0;
  FeatureSpace space = FeatureSpace::raw;

  double& operator[](Feature f) {
    switch (f) {
      case Feature::f0: return f0;
      case Feature::energy: return energy;
      case Feature::duration: return duration;
    }
    throw std::logic_error("bad feature");
  }
  double operator[](Feature f) const { return const_cast<AcousticFeatureVector&>(*this)[f]; }

  friend bool operator==(const AcousticFeatureVector&, const AcousticFeatureVector&) = default;
};

}  // namespace prosoctl
