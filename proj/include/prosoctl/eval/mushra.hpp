// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"
#include "prosoctl/common.hpp"

namespace prosoctl::eval {

struct RatingRecord {
  std::string listener_id;
  std::string screen_id;
  std::string system;
  int rating = 0;  // 0..100 in steps of 10
  bool is_hidden_reference = false;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && issp(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_bool(const std::string& s, const std::string& where) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "1" || l == "true" || l == "yes") return true;
  if (l == "0" || l == "false" || l == "no") return false;
  throw DataError(where + ": is_hidden_reference must be true/false, got '" + s + "'");
}

}  // namespace detail

inline void validate_rating(const RatingRecord& r, const std::string& where) {
  if (r.listener_id.empty() || r.screen_id.empty() || r.system.empty())
    throw DataError(where + ": empty listener, screen or system");
  if (r.rating < 0 || r.rating > 100 || r.rating % 10 != 0)
    throw DataError(where + ": rating " + std::to_string(r.rating) +
                    " is not one of 0, 10, ..., 100");
}

/// CSV with header listener_id,screen_id,system,rating,is_hidden_reference
/// (any column order).
inline std::vector<RatingRecord> parse_ratings_csv(const std::string& text,
                                                   const std::string& source = "<ratings>") {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> col;
  static const std::vector<std::string> kColumns{"listener_id", "screen_id", "system", "rating",
                                                 "is_hidden_reference"};
  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::trim(line).empty()) break;
  }
  if (detail::trim(line).empty()) throw DataError(source + ": empty ratings file");
  const auto header = detail::split_csv_line(detail::trim(line));
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& c : kColumns)
    if (!col.count(c)) throw DataError(source + ":" + std::to_string(lineno) + ": missing column " + c);
  std::vector<RatingRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto cells = detail::split_csv_line(detail::trim(line));
    if (cells.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    RatingRecord r;
    r.listener_id = cells[col["listener_id"]];
    r.screen_id = cells[col["screen_id"]];
    r.system = cells[col["system"]];
    const std::string& rating = cells[col["rating"]];
    std::size_t used = 0;
    try {
      r.rating = std::stoi(rating, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != rating.size()) throw DataError(where + ": rating '" + rating + "' is not an integer");
    r.is_hidden_reference = detail::parse_bool(cells[col["is_hidden_reference"]], where);
    validate_rating(r, where);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<RatingRecord> load_ratings_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open ratings file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_ratings_csv(ss.str(), path);
}

inline std::string to_csv(const std::vector<RatingRecord>& records) {
  std::string out = "listener_id,screen_id,system,rating,is_hidden_reference\n";
  for (const auto& r : records)
    out += r.listener_id + "," + r.screen_id + "," + r.system + "," + std::to_string(r.rating) + "," +
           (r.is_hidden_reference ? "true" : "false") + "\n";
  return out;
}

struct ListenerScore {
  std::size_t screens = 0;
  std::size_t failures = 0;
};

struct FilterResult {
  std::vector<std::string> kept;
  std::vector<std::string> rejected;
  std::map<std::string, ListenerScore> scores;
};

/// A screen is failed unless the hidden reference is rated strictly above
/// every other system on it; ties fail. Listeners failing more than half
/// their screens are rejected.
inline FilterResult filter_listeners(const std::vector<RatingRecord>& records) {
  // listener -> screen -> rows
  std::map<std::string, std::map<std::string, std::vector<const RatingRecord*>>> grouped;
  for (const auto& r : records) {
    validate_rating(r, "ratings");
    grouped[r.listener_id][r.screen_id].push_back(&r);
  }
  FilterResult out;
  for (const auto& [listener, screens] : grouped) {
    ListenerScore score;
    for (const auto& [screen, rows] : screens) {
      const RatingRecord* ref = nullptr;
      for (const auto* r : rows) {
        if (!r->is_hidden_reference) continue;
        if (ref) throw DataError("listener " + listener + ", screen " + screen + ": more than one hidden reference");
        ref = r;
      }
      if (!ref) throw DataError("listener " + listener + ", screen " + screen + ": no hidden reference");
      bool identified = true;
      for (const auto* r : rows)
        if (r != ref && r->rating >= ref->rating) identified = false;
      ++score.screens;
      if (!identified) ++score.failures;
    }
    out.scores[listener] = score;
    const bool reject = 2 * score.failures > score.screens;
    (reject ? out.rejected : out.kept).push_back(listener);
  }
  return out;
}

inline std::vector<RatingRecord> kept_records(const std::vector<RatingRecord>& records,
                                              const FilterResult& filter) {
  const std::set<std::string> kept(filter.kept.begin(), filter.kept.end());
  std::vector<RatingRecord> out;
  for (const auto& r : records)
    if (kept.count(r.listener_id)) out.push_back(r);
  return out;
}

/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw DataError("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct BoxStats {
  double q1 = 0, median = 0, q3 = 0;
  double whisker_low = 0, whisker_high = 0;  // most extreme data within 1.5 IQR
  double mean = 0;
  std::size_t n = 0;
  std::vector<double> outliers;
};

inline BoxStats box_stats(const std::vector<double>& values) {
  BoxStats b;
  b.n = values.size();
  b.q1 = quantile(values, 0.25);
  b.median = quantile(values, 0.5);
  b.q3 = quantile(values, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo = b.q1 - 1.5 * iqr, hi = b.q3 + 1.5 * iqr;
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  for (double v : values) {
    if (v < lo || v > hi) {
      b.outliers.push_back(v);
      continue;
    }
    b.whisker_low = std::min(b.whisker_low, v);
    b.whisker_high = std::max(b.whisker_high, v);
  }
  std::sort(b.outliers.begin(), b.outliers.end());
  b.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return b;
}

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

/// Unequal-variance two-sample t-test.
inline WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw DataError("welch t-test: need at least 2 observations per group");
  const auto mean_var = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, ss / (n - 1.0)};
  };
  const auto [ma, va] = mean_var(a);
  const auto [mb, vb] = mean_var(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  WelchResult r;
  if (sa + sb == 0.0) {
    r.df = na + nb - 2.0;
    if (ma == mb) return r;
    r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

/// Holm step-down adjustment, returned in input order.
inline std::vector<double> holm_adjust(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double adj = std::min(1.0, static_cast<double>(m - k) * p[order[k]]);
    running = std::max(running, adj);
    out[order[k]] = running;
  }
  return out;
}

struct PairwiseTest {
  std::string system_a, system_b;
  WelchResult welch;
  double p_adjusted = 1.0;
  bool significant = false;
};

struct MushraSummary {
  std::vector<std::string> systems;
  std::map<std::string, BoxStats> box;                      // over all ratings
  std::map<std::string, std::vector<double>> listener_means;  // ordered by listener id
  std::vector<PairwiseTest> tests;
  double alpha = 0.05;
};

inline MushraSummary mushra_analyze(const std::vector<RatingRecord>& records, double alpha = 0.05) {
  std::map<std::string, std::vector<double>> ratings;
  std::map<std::string, std::map<std::string, std::pair<double, int>>> per_listener;
  std::set<std::string> listeners;
  for (const auto& r : records) {
    validate_rating(r, "ratings");
    ratings[r.system].push_back(r.rating);
    auto& acc = per_listener[r.system][r.listener_id];
    acc.first += r.rating;
    acc.second += 1;
    listeners.insert(r.listener_id);
  }
  if (ratings.size() < 2) throw DataError("mushra: need at least 2 systems");
  if (listeners.size() < 2) throw DataError("mushra: need at least 2 listeners");
  MushraSummary s;
  s.alpha = alpha;
  for (const auto& [system, values] : ratings) {
    if (values.size() < 2) throw DataError("mushra: system " + system + " has fewer than 2 observations");
    s.systems.push_back(system);
    s.box[system] = box_stats(values);
    for (const auto& [_, acc] : per_listener[system]) s.listener_means[system].push_back(acc.first / acc.second);
    if (s.listener_means[system].size() < 2)
      throw DataError("mushra: system " + system + " was rated by fewer than 2 listeners");
  }
  std::vector<double> raw;
  for (std::size_t i = 0; i < s.systems.size(); ++i) {
    for (std::size_t j = i + 1; j < s.systems.size(); ++j) {
      PairwiseTest t;
      t.system_a = s.systems[i];
      t.system_b = s.systems[j];
      t.welch = welch_t_test(s.listener_means[t.system_a], s.listener_means[t.system_b]);
      raw.push_back(t.welch.p);
      s.tests.push_back(t);
    }
  }
  const auto adj = holm_adjust(raw);
  for (std::size_t k = 0; k < s.tests.size(); ++k) {
    s.tests[k].p_adjusted = adj[k];
    s.tests[k].significant = adj[k] <= alpha;
  }
  return s;
}

inline nlohmann::json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

inline nlohmann::json to_json(const FilterResult& f) {
  nlohmann::json scores = nlohmann::json::object();
  for (const auto& [id, s] : f.scores) scores[id] = {{"screens", s.screens}, {"failures", s.failures}};
  return {{"kept", f.kept}, {"rejected", f.rejected}, {"scores", scores}};
}

inline nlohmann::json to_json(const MushraSummary& s) {
  nlohmann::json systems = nlohmann::json::object();
  for (const auto& sys : s.systems) {
    const auto& b = s.box.at(sys);
    systems[sys] = {{"n", b.n},          {"mean", b.mean},
                    {"q1", b.q1},        {"median", b.median},
                    {"q3", b.q3},        {"whisker_low", b.whisker_low},
                    {"whisker_high", b.whisker_high}, {"outliers", b.outliers},
                    {"listener_means", s.listener_means.at(sys)}};
  }
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : s.tests)
    tests.push_back({{"a", t.system_a},
                     {"b", t.system_b},
                     {"t", number_or_string(t.welch.t)},
                     {"df", t.welch.df},
                     {"p", t.welch.p},
                     {"p_holm", t.p_adjusted},
                     {"significant", t.significant}});
  return {{"alpha", s.alpha}, {"systems", systems}, {"tests", tests}};
}

}  // namespace prosoctl::eval
