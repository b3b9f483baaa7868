// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "prosoctl/afp/gradcheck.hpp"
#include "prosoctl/afp/train.hpp"
#include "prosoctl/dsp/griffin_lim.hpp"
#include "prosoctl/dsp/pitch.hpp"
#include "prosoctl/dsp/stft.hpp"
#include "prosoctl/eval/experiments.hpp"
#include "prosoctl/eval/mushra.hpp"
#include "prosoctl/eval/prepare.hpp"
#include "prosoctl/service/session.hpp"
#include "test_signals.hpp"

using namespace prosoctl;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [" << what << "]";
    }
  }
};

int failures = 0;

void criterion(const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " exception: " << e.what();
  }
  if (!o.pass) ++failures;
  std::printf("%s %s (%.1f s)%s\n", o.pass ? "PASS" : "FAIL", name.c_str(), seconds_since(t0),
              o.detail.str().c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// Shared corpus: 20 generated utterances, features extracted from the audio,
// statistics over the whole set, and a predictor trained on it.
struct Shared {
  eval::RenderSetup setup;
  eval::PreparedCorpus prepared;
  eval::EvalCorpus corpus;
  afp::TrainConfig train_cfg;
  afp::AfpCheckpoint ckpt;
};

afp::TrainConfig experiment_train_config(std::uint64_t seed) {
  afp::TrainConfig cfg;
  cfg.max_iterations = 3000;
  cfg.seed = seed;
  cfg.log_every = 0;
  return cfg;
}

const Shared& shared() {
  static const Shared s = [] {
    Shared x;
    synth::CorpusGeneratorConfig g;
    g.n_utterances = 20;
    g.seed = 2026;
    x.setup.synth = g.synth;
    x.prepared = eval::prepare_records(
        eval::records_from_generated(synth::generate_corpus(g), x.setup.analysis), 0.0, 1);
    x.corpus = eval::eval_corpus(x.prepared.train, x.prepared.stats, g.synth.sample_rate, g.synth.hop);
    x.train_cfg = experiment_train_config(1);
    x.ckpt = afp::afp_train(x.prepared.train, x.train_cfg).checkpoint;
    return x;
  }();
  return s;
}

const char* name_of(Feature f) {
  static const char* names[] = {"f0", "energy", "duration"};
  return names[static_cast<int>(f)];
}

void f0_accuracy(Outcome& o) {
  const auto t0 = Clock::now();
  for (double hz : {100.0, 150.0, 220.0, 300.0}) {
    const auto a = testing::tone(hz, 1.0);
    const auto grid = dsp::FrameGrid::for_length(a.size(), dsp::kDefaultFftSize, dsp::kDefaultHop, dsp::Window::hann);
    const auto track = dsp::estimate_f0(a, grid);
    double err = 0.0;
    std::size_t n = 0;
    for (const auto& f : track.frames)
      if (f.voiced) {
        err += std::abs(f.f0 - hz);
        ++n;
      }
    o.require(n > track.size() / 2, fmt(hz) + " Hz: too few voiced frames");
    const double mean_err = n ? err / static_cast<double>(n) : 1e9;
    o.detail << " " << fmt(hz) << "Hz:" << fmt(mean_err);
    o.require(mean_err <= 2.0, fmt(hz) + " Hz error " + fmt(mean_err));
  }
  const auto quiet = testing::silence(1.0);
  const auto grid = dsp::FrameGrid::for_length(quiet.size(), dsp::kDefaultFftSize, dsp::kDefaultHop, dsp::Window::hann);
  for (const auto& f : dsp::estimate_f0(quiet, grid).frames) {
    if (f.voiced) {
      o.require(false, "voiced frame in silence");
      break;
    }
  }
  o.require(seconds_since(t0) < 5.0, "runtime");
}

void extraction_exactness(Outcome& o) {
  const auto& s = shared();
  std::size_t phones = 0, boundaries = 0;
  for (const auto& r : s.prepared.train) {
    for (std::size_t i = 0; i < r.phones.size(); ++i) {
      const auto& p = r.phones[i];
      if (p.is_boundary()) {
        ++boundaries;
        if (!(r.raw[i].f0 == 0.0 && r.raw[i].energy == 0.0 && r.raw[i].duration == 0.0))
          o.require(false, r.utterance_id + " boundary " + std::to_string(i) + " not zero");
        continue;
      }
      ++phones;
      const auto& span = *p.span;
      const double expected = static_cast<double>(span.end_frame) - static_cast<double>(span.start_frame) + 1.0;
      if (r.raw[i].duration != expected)
        o.require(false, r.utterance_id + " phone " + std::to_string(i) + " duration");
    }
  }
  o.detail << " phones:" << phones << " boundaries:" << boundaries;
  o.require(phones > 0 && boundaries > 0, "empty corpus");
}

void normalization(Outcome& o) {
  const auto& s = shared();
  // speaker -> feature -> z values
  std::map<std::string, std::array<std::vector<double>, 3>> z;
  for (const auto& r : s.prepared.train)
    for (std::size_t i = 0; i < r.phones.size(); ++i) {
      if (r.phones[i].is_boundary()) continue;
      for (Feature f : kAllFeatures) {
        if (f == Feature::f0 && r.raw[i].f0 == 0.0) continue;
        z[r.speaker_id][static_cast<int>(f)].push_back(r.normalized[i][f]);
      }
    }
  double worst_mean = 0.0, worst_std = 0.0;
  for (const auto& [spk, per] : z)
    for (const auto& v : per) {
      long double m = 0.0L, q = 0.0L;
      for (double x : v) m += x;
      m /= static_cast<long double>(v.size());
      for (double x : v) q += (x - m) * (x - m);
      const double sd = std::sqrt(static_cast<double>(q / static_cast<long double>(v.size())));
      worst_mean = std::max(worst_mean, std::abs(static_cast<double>(m)));
      worst_std = std::max(worst_std, std::abs(sd - 1.0));
    }
  o.detail << " speakers:" << z.size() << " max|mean|:" << fmt(worst_mean) << " max|std-1|:" << fmt(worst_std);
  o.require(z.size() >= 2, "speakers");
  o.require(worst_mean < 1e-9 && worst_std < 1e-9, "moments");
}

void gradient_check(Outcome& o) {
  const auto t0 = Clock::now();
  const auto r = afp::gradient_check_suite(20260, 20, 1e-5);
  o.detail << " configs:20 max_rel:" << fmt(r.max_relative_error) << " params:" << r.parameters_checked;
  o.require(r.max_relative_error < 1e-4, "relative error");
  o.require(seconds_since(t0) < 60.0, "runtime");
}

void memorization(Outcome& o) {
  const auto t0 = Clock::now();
  synth::CorpusGeneratorConfig g;
  g.n_utterances = 10;
  g.seed = 77;
  const auto prepared =
      eval::prepare_records(eval::records_from_generated(synth::generate_corpus(g), {}), 0.0, 1);
  afp::TrainConfig cfg;
  cfg.max_iterations = 5000;
  cfg.seed = 5;
  cfg.log_every = 0;
  const auto a = afp::afp_train(prepared.train, cfg);
  const double l1 = afp::afp_evaluate(a.checkpoint, prepared.train);
  const auto b = afp::afp_train(prepared.train, cfg);
  o.detail << " training L1:" << fmt(l1);
  o.require(l1 < 0.05, "L1");
  o.require(a.loss_trace == b.loss_trace && a.loss_trace.size() == 5000, "loss traces differ");
  o.require(a.checkpoint == b.checkpoint, "checkpoints differ");
  o.require(seconds_since(t0) < 600.0, "runtime");
}

void disentanglement(Outcome& o) {
  const auto& s = shared();
  const auto grid = eval::default_grid();
  for (Feature edited : kAllFeatures) {
    const auto r = eval::run_disentanglement(s.corpus, s.ckpt, s.setup, grid, edited);
    const auto curve = r.curve("utterance", edited);
    o.require(eval::strictly_increasing(curve), std::string(name_of(edited)) + " not monotone");
    double off = 0.0;
    for (const auto& l : r.levels)
      for (Feature m : kAllFeatures) {
        const double mean = l.groups.at("utterance")[static_cast<int>(m)].mean;
        if (l.shift == 0.0 && mean != 0.0) o.require(false, std::string(name_of(edited)) + " nonzero at 0");
        if (m != edited) off = std::max(off, std::abs(mean));
      }
    o.detail << " " << name_of(edited) << ":[" << fmt(curve.front()) << "," << fmt(curve.back())
             << "] off:" << fmt(off);
    o.require(off < 0.03, std::string(name_of(edited)) + " off-target");
  }
}

void temporal_precision(Outcome& o) {
  const auto& s = shared();
  for (Feature edited : kAllFeatures) {
    const auto r = eval::run_temporal_precision(s.corpus, s.ckpt, s.setup, 0.5, 31, eval::default_grid(), edited);
    o.require(eval::strictly_increasing(r.curve("modified", edited)), std::string(name_of(edited)) + " not monotone");
    double unmod = 0.0, unmod_dur = 0.0;
    for (const auto& l : r.levels) {
      const auto& g = l.groups.at("unmodified");
      for (Feature m : kAllFeatures) unmod = std::max(unmod, std::abs(g[static_cast<int>(m)].mean));
      unmod_dur = std::max(unmod_dur, g[static_cast<int>(Feature::duration)].max_abs);
    }
    o.detail << " " << name_of(edited) << " unmodified:" << fmt(unmod);
    o.require(unmod < 0.03, std::string(name_of(edited)) + " unmodified change");
    o.require(unmod_dur == 0.0, std::string(name_of(edited)) + " unmodified durations changed");
  }
}

void reproducibility(Outcome& o) {
  const auto& s = shared();
  for (Feature edited : kAllFeatures) {
    const auto r = eval::run_reproducibility(s.prepared.train, s.corpus, experiment_train_config(0), {11, 12, 13},
                                             s.setup, eval::default_grid(), edited);
    o.detail << " " << name_of(edited) << ":" << (r.signs_agree ? "sign" : "SIGN") << "/"
             << (r.all_monotone ? "mono" : "MONO");
    o.require(r.signs_agree, std::string(name_of(edited)) + " signs");
    o.require(r.all_monotone, std::string(name_of(edited)) + " monotonicity");
  }
}

void griffin_lim(Outcome& o) {
  std::vector<dsp::AudioBuffer> signals{
      testing::speech_like(0.5, 110, 170), testing::speech_like(0.4, 220, 180), testing::tone(300.0, 0.4),
      testing::white_noise(0.4, 3),
      testing::tone_sequence({{120.0, 0.2}, {200.0, 0.2}, {150.0, 0.2}})};
  std::uint64_t seed = 40;
  for (std::size_t k = 0; k < signals.size(); ++k) {
    const auto& a = signals[k];
    const auto grid = dsp::FrameGrid::for_length(a.size(), dsp::kDefaultFftSize, dsp::kDefaultHop, dsp::Window::hann);
    const auto target = dsp::magnitude(dsp::stft(a, grid));
    const auto r = dsp::griffin_lim_magnitude(target, grid, a.size(), a.sample_rate, 60, seed++);
    o.require(r.convergence.size() == 61, "trace length");
    for (std::size_t i = 1; i < r.convergence.size(); ++i)
      if (r.convergence[i] > r.convergence[i - 1] + 1e-6) {
        o.require(false, "signal " + std::to_string(k) + " increases at " + std::to_string(i));
        break;
      }
    o.detail << " " << fmt(r.convergence.front()) << "->" << fmt(r.convergence.back());
  }
}

std::vector<eval::RatingRecord> six_listener_fixture() {
  std::vector<eval::RatingRecord> out;
  const auto screen = [&](const std::string& l, int s, int ref, int a, int b) {
    const std::string id = "s" + std::to_string(s);
    out.push_back({l, id, "ref", ref, true});
    out.push_back({l, id, "ctrl", a, false});
    out.push_back({l, id, "base", b, false});
  };
  for (int s = 0; s < 4; ++s) screen("L1", s, 100, 70, 50);
  for (int s = 0; s < 4; ++s) screen("L2", s, 90, 90, 40);
  for (int s = 0; s < 4; ++s) screen("L3", s, s < 2 ? 60 : 100, 80, 40);
  for (int s = 0; s < 4; ++s) screen("L4", s, s < 3 ? 50 : 100, 80, 40);
  for (int s = 0; s < 4; ++s) screen("L5", s, s == 0 ? 70 : 90, 70, 30);
  for (int s = 0; s < 4; ++s) screen("L6", s, 20, 60, 80);
  return out;
}

void mushra(Outcome& o) {
  const auto f = eval::filter_listeners(six_listener_fixture());
  o.require(f.kept == std::vector<std::string>{"L1", "L3", "L5"}, "kept listeners");
  o.require(f.rejected == std::vector<std::string>{"L2", "L4", "L6"}, "rejected listeners");

  const auto holm = eval::holm_adjust({0.01, 0.03, 0.04});
  const std::vector<double> expected{0.03, 0.06, 0.06};
  for (std::size_t i = 0; i < 3; ++i) o.require(std::abs(holm[i] - expected[i]) < 1e-12, "holm");

  // Frozen scipy.stats.ttest_ind(equal_var=False) outputs.
  struct W {
    std::vector<double> a, b;
    double t, p;
  };
  const std::vector<W> fixtures{
      {{60, 70, 80}, {40, 50, 60}, 2.449489742783178, 0.07048399691021993},
      {{55, 65, 70, 90, 100}, {30, 40, 40, 60}, 3.2222960729107064, 0.014925369496020462},
      {{10, 20, 20, 30, 90, 100}, {50, 55, 60, 65, 70, 75, 80}, -1.2060453783110543, 0.27589274047943996},
  };
  double worst = 0.0;
  for (const auto& w : fixtures) {
    const auto r = eval::welch_t_test(w.a, w.b);
    worst = std::max({worst, std::abs(r.t - w.t), std::abs(r.p - w.p)});
  }
  o.detail << " welch max err:" << fmt(worst);
  o.require(worst < 1e-9, "welch");
}

void replay_determinism(Outcome& o) {
  const auto& s = shared();
  const auto ctx = service::make_context(s.prepared.train, s.prepared.stats, s.ckpt, s.setup);
  std::size_t checked = 0;
  for (const std::string id : {"utt0000", "utt0007", "utt0013"}) {
    service::SessionManager a(ctx);
    const auto sid = a.create(id)->session_id;
    control::EditScript first;
    first.ops.push_back({control::StressedVowelsRandom{0.5, 9}, Feature::f0, control::ShiftSigma{0.5}});
    a.edit(sid, 0, first);
    a.edit(sid, 1, control::shift_all(Feature::energy, -0.25));
    a.edit(sid, 2, control::shift_all(Feature::duration, 0.25));
    const auto done = a.synthesize(sid);

    service::SessionManager b(ctx);
    const auto bid = b.create(id)->session_id;
    b.edit(bid, 0, done->script);
    const auto again = b.synthesize(bid);
    const auto direct = service::replay_render(ctx, *done->utterance, *done->base, done->script);
    o.require(again->rendition->audio->samples == done->rendition->audio->samples, id + " session replay audio");
    o.require(*again->rendition->wav == *done->rendition->wav, id + " wav bytes");
    o.require(direct.rendition.audio.samples == done->rendition->audio->samples, id + " direct replay");
    ++checked;
  }
  o.detail << " utterances:" << checked;
}

}  // namespace

int main() {
  criterion("f0-estimator-accuracy", f0_accuracy);
  criterion("per-phone-extraction-exactness", extraction_exactness);
  criterion("per-speaker-normalization", normalization);
  criterion("afp-gradient-check", gradient_check);
  criterion("afp-memorization", memorization);
  criterion("disentanglement", disentanglement);
  criterion("temporal-precision", temporal_precision);
  criterion("reproducibility-across-seeds", reproducibility);
  criterion("griffin-lim-convergence", griffin_lim);
  criterion("mushra-pipeline", mushra);
  criterion("replay-determinism", replay_determinism);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
