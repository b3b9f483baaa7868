// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "prosoctl/eval/experiments.hpp"
#include "prosoctl/eval/mushra.hpp"

namespace prosoctl::eval {

/// One line of a line/whisker chart: mean at each x with +-std whiskers.
struct Series {
  std::string label;
  std::vector<double> x, mean, std;
};

namespace svg {

inline const char* color(std::size_t i) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  return kPalette[i % 6];
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Frame {
  double width = 640, height = 400, left = 70, right = 20, top = 40, bottom = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline std::string open(const Frame& f, const std::string& title) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) + "\" height=\"" +
                  num(f.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(f.width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(title) + "</text>\n";
  return s;
}

inline std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel, int ticks = 5) {
  std::string s;
  s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.py(f.y0)) + "\" x2=\"" + num(f.width - f.right) +
       "\" y2=\"" + num(f.py(f.y0)) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(f.left) + "\" y2=\"" +
       num(f.height - f.bottom) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= ticks; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / ticks;
    char lab[32];
    std::snprintf(lab, sizeof(lab), "%.3g", y);
    s += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(f.py(y) + 4) + "\" text-anchor=\"end\">" + lab + "</text>\n";
    s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.py(y)) + "\" x2=\"" + num(f.width - f.right) +
         "\" y2=\"" + num(f.py(y)) + "\" stroke=\"#eee\"/>\n";
  }
  s += "<text x=\"" + num((f.left + f.width - f.right) / 2) + "\" y=\"" + num(f.height - 12) +
       "\" text-anchor=\"middle\">" + escape(xlabel) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((f.top + f.height - f.bottom) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num((f.top + f.height - f.bottom) / 2) + ")\">" + escape(ylabel) + "</text>\n";
  return s;
}

}  // namespace svg

inline std::string line_chart_svg(const std::string& title, const std::vector<Series>& series,
                                  const std::string& xlabel = "shift (sigma)",
                                  const std::string& ylabel = "relative change") {
  svg::Frame f;
  double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = 0.0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      const double sd = i < s.std.size() ? s.std[i] : 0.0;
      ymin = std::min(ymin, s.mean[i] - sd);
      ymax = std::max(ymax, s.mean[i] + sd);
    }
  }
  if (xmin >= xmax) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  if (ymax - ymin < 1e-9) {
    ymin -= 0.01;
    ymax += 0.01;
  }
  const double pad = 0.05 * (ymax - ymin);
  f.x0 = xmin - 0.05 * (xmax - xmin);
  f.x1 = xmax + 0.05 * (xmax - xmin);
  f.y0 = ymin - pad;
  f.y1 = ymax + pad;
  std::string out = svg::open(f, title) + svg::axes(f, xlabel, ylabel);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = svg::color(k);
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      pts += svg::num(f.px(s.x[i])) + "," + svg::num(f.py(s.mean[i])) + " ";
      const double sd = i < s.std.size() ? s.std[i] : 0.0;
      out += "<line x1=\"" + svg::num(f.px(s.x[i])) + "\" y1=\"" + svg::num(f.py(s.mean[i] - sd)) + "\" x2=\"" +
             svg::num(f.px(s.x[i])) + "\" y2=\"" + svg::num(f.py(s.mean[i] + sd)) + "\" stroke=\"" + c + "\"/>\n";
      out += "<circle cx=\"" + svg::num(f.px(s.x[i])) + "\" cy=\"" + svg::num(f.py(s.mean[i])) +
             "\" r=\"3\" fill=\"" + c + "\"/>\n";
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" points=\"" + pts + "\"/>\n";
    out += "<text x=\"" + svg::num(f.width - f.right - 110) + "\" y=\"" + svg::num(f.top + 14 * (k + 1)) +
           "\" fill=\"" + c + "\">" + svg::escape(s.label) + "</text>\n";
  }
  return out + "</svg>\n";
}

/// Series for every measured feature of one group of an experiment.
inline std::vector<Series> report_series(const ExperimentReport& r, const std::string& group) {
  std::vector<Series> out;
  for (Feature m : kAllFeatures) {
    Series s;
    s.label = group + " " + to_string(m);
    for (const auto& l : r.levels) {
      const auto it = l.groups.find(group);
      if (it == l.groups.end()) throw DataError("plot: report has no group '" + group + "'");
      s.x.push_back(l.shift);
      s.mean.push_back(it->second[static_cast<int>(m)].mean);
      s.std.push_back(it->second[static_cast<int>(m)].std);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string experiment_svg(const ExperimentReport& r) {
  std::vector<Series> series;
  if (r.kind == "temporal_precision") {
    for (const auto& g : {"modified", "unmodified"})
      for (auto& s : report_series(r, g))
        if (s.label.ends_with(to_string(r.edited))) series.push_back(std::move(s));
  } else {
    series = report_series(r, "utterance");
  }
  return line_chart_svg(r.kind + ": " + to_string(r.edited) + " shifted", series);
}

/// On-target curves of several seeds overlaid.
inline std::string reproducibility_svg(const ReproducibilityReport& r) {
  std::vector<Series> series;
  for (std::size_t k = 0; k < r.per_seed.size(); ++k) {
    const auto& rep = r.per_seed[k];
    for (auto& s : report_series(rep, "utterance")) {
      if (!s.label.ends_with(to_string(rep.edited))) continue;
      s.label = "seed " + std::to_string(rep.seeds.empty() ? 0 : rep.seeds.front());
      series.push_back(std::move(s));
    }
  }
  const std::string edited = r.per_seed.empty() ? "" : to_string(r.per_seed.front().edited);
  return line_chart_svg("reproducibility: " + edited, series);
}

inline std::string box_plot_svg(const MushraSummary& s, const std::string& title = "ratings") {
  svg::Frame f;
  f.x0 = 0.0;
  f.x1 = static_cast<double>(s.systems.size());
  f.y0 = 0.0;
  f.y1 = 100.0;
  std::string out = svg::open(f, title) + svg::axes(f, "system", "rating", 10);
  for (std::size_t k = 0; k < s.systems.size(); ++k) {
    const auto& b = s.box.at(s.systems[k]);
    const double cx = f.px(static_cast<double>(k) + 0.5);
    const double hw = 0.3 * (f.px(1.0) - f.px(0.0));
    const char* c = svg::color(k);
    out += "<line x1=\"" + svg::num(cx) + "\" y1=\"" + svg::num(f.py(b.whisker_low)) + "\" x2=\"" + svg::num(cx) +
           "\" y2=\"" + svg::num(f.py(b.whisker_high)) + "\" stroke=\"black\"/>\n";
    for (double w : {b.whisker_low, b.whisker_high})
      out += "<line x1=\"" + svg::num(cx - hw / 2) + "\" y1=\"" + svg::num(f.py(w)) + "\" x2=\"" + svg::num(cx + hw / 2) +
             "\" y2=\"" + svg::num(f.py(w)) + "\" stroke=\"black\"/>\n";
    out += "<rect x=\"" + svg::num(cx - hw) + "\" y=\"" + svg::num(f.py(b.q3)) + "\" width=\"" + svg::num(2 * hw) +
           "\" height=\"" + svg::num(f.py(b.q1) - f.py(b.q3)) + "\" fill=\"" + c +
           "\" fill-opacity=\"0.5\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + svg::num(cx - hw) + "\" y1=\"" + svg::num(f.py(b.median)) + "\" x2=\"" + svg::num(cx + hw) +
           "\" y2=\"" + svg::num(f.py(b.median)) + "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    for (double o : b.outliers)
      out += "<circle cx=\"" + svg::num(cx) + "\" cy=\"" + svg::num(f.py(o)) + "\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n";
    out += "<text x=\"" + svg::num(cx) + "\" y=\"" + svg::num(f.height - f.bottom + 16) + "\" text-anchor=\"middle\">" +
           svg::escape(s.systems[k]) + "</text>\n";
  }
  return out + "</svg>\n";
}

}  // namespace prosoctl::eval
