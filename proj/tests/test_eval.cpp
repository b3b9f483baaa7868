// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prosoctl/eval/experiments.hpp"
#include "prosoctl/eval/mushra.hpp"
#include "prosoctl/eval/plot.hpp"
#include "prosoctl/eval/prepare.hpp"
#include "prosoctl/eval/report.hpp"

namespace prosoctl::eval {
namespace {

// Welch values below were produced by scipy.stats.ttest_ind(equal_var=False)
// and pasted here; the implementation under test uses Boost.Math.
struct WelchFixture {
  std::vector<double> a, b;
  double t, p;
};
const std::vector<WelchFixture>& welch_fixtures() {
  static const std::vector<WelchFixture> f{
      {{60, 70, 80}, {40, 50, 60}, 2.449489742783178, 0.07048399691021993},
      {{55, 65, 70, 90, 100}, {30, 40, 40, 60}, 3.2222960729107064, 0.014925369496020462},
      {{10, 20, 20, 30, 90, 100}, {50, 55, 60, 65, 70, 75, 80}, -1.2060453783110543, 0.27589274047943996},
  };
  return f;
}

TEST(Welch, MatchesFrozenOracle) {
  for (const auto& f : welch_fixtures()) {
    const auto r = welch_t_test(f.a, f.b);
    EXPECT_NEAR(r.t, f.t, 1e-9);
    EXPECT_NEAR(r.p, f.p, 1e-9);
  }
}

TEST(Welch, IdenticalSamplesGiveZero) {
  const auto r = welch_t_test({40, 60, 70, 90}, {90, 70, 60, 40});
  EXPECT_EQ(r.t, 0.0);
  EXPECT_DOUBLE_EQ(r.p, 1.0);
  EXPECT_THROW(welch_t_test({50}, {40, 60}), DataError);
}

TEST(Welch, SwappingGroupsNegatesT) {
  const auto& f = welch_fixtures()[1];
  const auto ab = welch_t_test(f.a, f.b), ba = welch_t_test(f.b, f.a);
  EXPECT_DOUBLE_EQ(ab.t, -ba.t);
  EXPECT_DOUBLE_EQ(ab.p, ba.p);
}

TEST(Holm, HandComputedExample) {
  const auto adj = holm_adjust({0.01, 0.03, 0.04});
  ASSERT_EQ(adj.size(), 3u);
  EXPECT_NEAR(adj[0], 0.03, 1e-15);
  EXPECT_NEAR(adj[1], 0.06, 1e-15);
  EXPECT_NEAR(adj[2], 0.06, 1e-15);
}

TEST(Holm, MonotoneClampedAndPermutationInvariant) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(1 + rng.index(8));
    for (auto& x : p) x = rng.uniform();
    const auto adj = holm_adjust(p);
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return p[i] < p[j]; });
    for (std::size_t k = 0; k < order.size(); ++k) {
      EXPECT_GE(adj[order[k]], p[order[k]]);
      EXPECT_LE(adj[order[k]], 1.0);
      if (k) {
        EXPECT_GE(adj[order[k]], adj[order[k - 1]]);
      }
    }
    auto shuffled_idx = rng.permutation(p.size());
    std::vector<double> q;
    for (auto i : shuffled_idx) q.push_back(p[i]);
    const auto adj_q = holm_adjust(q);
    for (std::size_t k = 0; k < q.size(); ++k) EXPECT_EQ(adj_q[k], adj[shuffled_idx[k]]);
  }
}

// Four screens per listener. Each screen has the hidden reference and two
// systems.
std::vector<RatingRecord> six_listener_fixture() {
  std::vector<RatingRecord> out;
  const auto screen = [&](const std::string& l, int s, int ref, int a, int b) {
    const std::string id = "s" + std::to_string(s);
    out.push_back({l, id, "ref", ref, true});
    out.push_back({l, id, "ctrl", a, false});
    out.push_back({l, id, "base", b, false});
  };
  for (int s = 0; s < 4; ++s) screen("L1", s, 100, 70, 50);          // always right
  for (int s = 0; s < 4; ++s) screen("L2", s, 90, 90, 40);           // always tied
  for (int s = 0; s < 4; ++s) screen("L3", s, s < 2 ? 60 : 100, 80, 40);  // 2 of 4 wrong
  for (int s = 0; s < 4; ++s) screen("L4", s, s < 3 ? 50 : 100, 80, 40);  // 3 of 4 wrong
  for (int s = 0; s < 4; ++s) screen("L5", s, s == 0 ? 70 : 90, 70, 30);  // one tie
  for (int s = 0; s < 4; ++s) screen("L6", s, 20, 60, 80);           // never right
  return out;
}

TEST(FilterListeners, HandComputedDecisions) {
  const auto f = filter_listeners(six_listener_fixture());
  EXPECT_EQ(f.kept, (std::vector<std::string>{"L1", "L3", "L5"}));
  EXPECT_EQ(f.rejected, (std::vector<std::string>{"L2", "L4", "L6"}));
  EXPECT_EQ(f.scores.at("L2").failures, 4u);
  EXPECT_EQ(f.scores.at("L3").failures, 2u);
  EXPECT_EQ(f.scores.at("L5").failures, 1u);
  EXPECT_EQ(f.scores.at("L1").screens, 4u);
}

TEST(FilterListeners, MissingOrDuplicateReferenceRejected) {
  auto recs = six_listener_fixture();
  recs.erase(recs.begin());  // L1 s0 reference
  EXPECT_THROW(filter_listeners(recs), DataError);
  recs = six_listener_fixture();
  recs[1].is_hidden_reference = true;
  EXPECT_THROW(filter_listeners(recs), DataError);
}

TEST(RatingsCsv, RoundTripAndValidation) {
  const auto recs = six_listener_fixture();
  EXPECT_EQ(parse_ratings_csv(to_csv(recs)), recs);
  EXPECT_THROW(parse_ratings_csv("listener_id,screen_id,system,rating,is_hidden_reference\nL,s,a,55,false\n"),
               DataError);
  EXPECT_THROW(parse_ratings_csv("listener_id,screen_id,system,rating,is_hidden_reference\nL,s,a,x,false\n"),
               DataError);
  EXPECT_THROW(parse_ratings_csv("listener_id,screen_id,system,rating\nL,s,a,50\n"), DataError);
  const auto reordered =
      parse_ratings_csv("rating,system,is_hidden_reference,screen_id,listener_id\n80,ctrl,0,s1,L9\n");
  ASSERT_EQ(reordered.size(), 1u);
  EXPECT_EQ(reordered[0], (RatingRecord{"L9", "s1", "ctrl", 80, false}));
}

TEST(BoxStats, QuartilesMatchLinearInterpolation) {
  // numpy.percentile([10,20,20,30,90,100], [25,50,75]) = 20, 25, 75.
  const auto b = box_stats({100, 20, 10, 30, 20, 90});
  EXPECT_DOUBLE_EQ(b.q1, 20.0);
  EXPECT_DOUBLE_EQ(b.median, 25.0);
  EXPECT_DOUBLE_EQ(b.q3, 75.0);
  EXPECT_DOUBLE_EQ(b.whisker_low, 10.0);
  EXPECT_DOUBLE_EQ(b.whisker_high, 100.0);
  EXPECT_TRUE(b.outliers.empty());
}

TEST(BoxStats, WhiskersStopAtOnePointFiveIqr) {
  // q1 = 60, q3 = 70, fences 45 and 85.
  const auto b = box_stats({0, 50, 60, 60, 60, 70, 70, 70, 80, 100});
  EXPECT_DOUBLE_EQ(b.q1, 60.0);
  EXPECT_DOUBLE_EQ(b.q3, 70.0);
  EXPECT_DOUBLE_EQ(b.whisker_low, 50.0);
  EXPECT_DOUBLE_EQ(b.whisker_high, 80.0);
  EXPECT_EQ(b.outliers, (std::vector<double>{0, 100}));
}

TEST(Mushra, AnalyzeUsesPerListenerMeans) {
  const auto all = six_listener_fixture();
  const auto filter = filter_listeners(all);
  const auto kept = kept_records(all, filter);
  const auto s = mushra_analyze(kept);
  EXPECT_EQ(s.systems, (std::vector<std::string>{"base", "ctrl", "ref"}));
  ASSERT_EQ(s.tests.size(), 3u);
  // L1, L3, L5 means for ctrl: 70, 80, 70.
  EXPECT_EQ(s.listener_means.at("ctrl"), (std::vector<double>{70, 80, 70}));
  std::vector<double> raw;
  for (const auto& t : s.tests) {
    const auto w = welch_t_test(s.listener_means.at(t.system_a), s.listener_means.at(t.system_b));
    EXPECT_EQ(t.welch.t, w.t);
    raw.push_back(w.p);
  }
  const auto adj = holm_adjust(raw);
  for (std::size_t k = 0; k < adj.size(); ++k) {
    EXPECT_EQ(s.tests[k].p_adjusted, adj[k]);
    EXPECT_EQ(s.tests[k].significant, adj[k] <= 0.05);
  }
  EXPECT_TRUE(to_json(s).contains("tests"));
}

TEST(Mushra, IdenticalSystemsNotSignificant) {
  std::vector<RatingRecord> recs;
  for (const char* l : {"a", "b", "c"})
    for (int s = 0; s < 2; ++s) {
      const int v = 40 + 10 * s + (l[0] - 'a') * 10;
      recs.push_back({l, std::to_string(s), "x", v, false});
      recs.push_back({l, std::to_string(s), "y", v, false});
    }
  const auto s = mushra_analyze(recs);
  ASSERT_EQ(s.tests.size(), 1u);
  EXPECT_EQ(s.tests[0].welch.t, 0.0);
  EXPECT_DOUBLE_EQ(s.tests[0].p_adjusted, 1.0);
  EXPECT_FALSE(s.tests[0].significant);
}

TEST(Mushra, Preconditions) {
  std::vector<RatingRecord> one_system{{"a", "1", "x", 50, false}, {"b", "1", "x", 60, false}};
  EXPECT_THROW(mushra_analyze(one_system), DataError);
  std::vector<RatingRecord> one_listener{{"a", "1", "x", 50, false}, {"a", "2", "x", 60, false},
                                         {"a", "1", "y", 50, false}, {"a", "2", "y", 60, false}};
  EXPECT_THROW(mushra_analyze(one_listener), DataError);
}

// Closed-loop experiments on a small generated corpus. The predictor is an
// untrained checkpoint; the experiment contracts hold for any predictor.
struct Fixture {
  RenderSetup setup;
  PreparedCorpus prepared;
  EvalCorpus corpus;
  afp::AfpCheckpoint ckpt;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    synth::CorpusGeneratorConfig g;
    g.n_utterances = 6;
    g.seed = 11;
    x.setup.synth = g.synth;
    x.prepared = prepare_records(records_from_generated(synth::generate_corpus(g), x.setup.analysis), 0.0, 3);
    afp::AfpDims dims;
    dims.layer_units = {8, 8};
    dims.dense_units = 8;
    x.ckpt = afp::init_checkpoint(x.prepared.train, dims, 5);
    x.corpus = eval_corpus(x.prepared.all(), x.prepared.stats, g.synth.sample_rate, g.synth.hop);
    return x;
  }();
  return f;
}

TEST(Disentanglement, ZeroShiftIsExactlyZero) {
  const auto& f = fixture();
  for (Feature feat : kAllFeatures) {
    const auto r = run_disentanglement(f.corpus, f.ckpt, f.setup, {0.0, 0.25}, feat);
    const auto& zero = r.level(0.0).groups.at("utterance");
    for (Feature m : kAllFeatures) {
      EXPECT_EQ(zero[static_cast<int>(m)].mean, 0.0);
      EXPECT_EQ(zero[static_cast<int>(m)].max_abs, 0.0);
    }
  }
}

TEST(Disentanglement, F0ShiftMonotoneAndOffTargetSmall) {
  const auto& f = fixture();
  const auto r = run_disentanglement(f.corpus, f.ckpt, f.setup, default_grid(), Feature::f0);
  EXPECT_EQ(r.grid, default_grid());
  EXPECT_TRUE(strictly_increasing(r.curve("utterance", Feature::f0)));
  EXPECT_GT(r.level(0.25).groups.at("utterance")[0].mean, 0.0);
  for (const auto& l : r.levels) {
    EXPECT_LT(std::abs(l.groups.at("utterance")[1].mean), 0.03);
    EXPECT_LT(std::abs(l.groups.at("utterance")[2].mean), 0.03);
    EXPECT_FALSE(l.flagged);
  }
}

TEST(Disentanglement, DurationShiftGrowsEveryUtteranceByExactFrameCount) {
  const auto& f = fixture();
  for (const auto& utt : f.corpus.utterances) {
    const auto& stats = f.corpus.stats.at(utt.speaker_id);
    const auto z = afp::afp_forward(utt.phones, utt.speaker_id, f.ckpt);
    const auto edited = control::apply_edits(z, control::shift_all(Feature::duration, 0.5), utt.phones, stats);
    // Oracle: frame count is the sum of clamped, rounded phone durations.
    const auto frames = [&](const std::vector<AcousticFeatureVector>& v) {
      long long n = 0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (utt.phones[i].is_boundary()) continue;
        const double d = stats.duration.mean + v[i].duration * features::scale_of(stats.duration);
        n += std::max(1LL, std::llround(d));
      }
      return n;
    };
    const auto base = render(utt, z, stats, f.setup);
    const auto shifted = render(utt, edited, stats, f.setup);
    EXPECT_EQ(static_cast<long long>(utterance_measures(shifted.analysis).duration), frames(edited));
    EXPECT_EQ(static_cast<long long>(utterance_measures(base.analysis).duration), frames(z));
    EXPECT_GT(frames(edited), frames(z)) << utt.utterance_id;
  }
  const auto r = run_disentanglement(f.corpus, f.ckpt, f.setup, default_grid(), Feature::duration);
  EXPECT_TRUE(r.level(-0.5).flagged);
  EXPECT_FALSE(r.level(-0.25).flagged);
  EXPECT_GT(r.level(0.5).groups.at("utterance")[2].mean, 0.0);
  EXPECT_GT(r.level(0.5).groups.at("utterance")[2].n, 0u);
}

TEST(Disentanglement, JobsDoNotChangeReport) {
  const auto& f = fixture();
  RenderSetup parallel = f.setup;
  parallel.jobs = 3;
  const auto a = run_disentanglement(f.corpus, f.ckpt, f.setup, {0.0, 0.5}, Feature::energy);
  const auto b = run_disentanglement(f.corpus, f.ckpt, parallel, {0.0, 0.5}, Feature::energy);
  EXPECT_EQ(to_json(a), to_json(b));
}

TEST(Disentanglement, Errors) {
  const auto& f = fixture();
  EXPECT_THROW(run_disentanglement({}, f.ckpt, f.setup, default_grid(), Feature::f0), DataError);
  EXPECT_THROW(run_disentanglement(f.corpus, f.ckpt, f.setup, {}, Feature::f0), UsageError);
  EvalCorpus missing = f.corpus;
  missing.stats.speakers.erase(missing.utterances.front().speaker_id);
  EXPECT_THROW(run_disentanglement(missing, f.ckpt, f.setup, {0.0}, Feature::f0), DataError);
}

TEST(TemporalPrecision, GroupsBehaveAsRequired) {
  const auto& f = fixture();
  const auto r = run_temporal_precision(f.corpus, f.ckpt, f.setup, 0.5, 2, {0.0, 0.25, 0.5}, Feature::f0);
  for (const auto& g : {"modified", "unmodified"})
    for (Feature m : kAllFeatures) EXPECT_EQ(r.level(0.0).groups.at(g)[static_cast<int>(m)].max_abs, 0.0);
  EXPECT_TRUE(strictly_increasing(r.curve("modified", Feature::f0)));
  EXPECT_GT(r.level(0.5).groups.at("modified")[0].mean, 0.0);
  for (const auto& l : r.levels) EXPECT_LT(std::abs(l.groups.at("unmodified")[0].mean), 0.03);

  const auto d = run_temporal_precision(f.corpus, f.ckpt, f.setup, 0.5, 2, default_grid(), Feature::duration);
  for (const auto& l : d.levels) EXPECT_EQ(l.groups.at("unmodified")[2].max_abs, 0.0);
  EXPECT_TRUE(strictly_increasing(d.curve("modified", Feature::duration)));
}

TEST(Reproducibility, DivergenceSummary) {
  const auto& f = fixture();
  const auto r = run_disentanglement(f.corpus, f.ckpt, f.setup, {0.0, 0.5}, Feature::f0);
  const auto single = summarize_reproducibility({r});
  for (const auto& row : single.divergence)
    for (double d : row) EXPECT_EQ(d, 0.0);
  const auto twice = summarize_reproducibility({r, r});
  for (const auto& row : twice.divergence)
    for (double d : row) EXPECT_EQ(d, 0.0);
  EXPECT_TRUE(twice.signs_agree);

  auto flipped = r;
  flipped.levels[1].groups["utterance"][0].mean = -0.01;
  const auto bad = summarize_reproducibility({r, flipped});
  EXPECT_FALSE(bad.signs_agree);
  EXPECT_FALSE(bad.all_monotone);
  EXPECT_DOUBLE_EQ(bad.divergence[1][0], std::abs(r.levels[1].groups.at("utterance")[0].mean + 0.01));
}

TEST(Reproducibility, SameSeedTwiceHasZeroDivergence) {
  const auto& f = fixture();
  afp::TrainConfig cfg;
  cfg.max_iterations = 20;
  cfg.dims = f.ckpt.dims;
  const auto rep = run_reproducibility(f.prepared.train, f.corpus, cfg, {4, 4}, f.setup, {0.0, 0.5}, Feature::f0);
  ASSERT_EQ(rep.per_seed.size(), 2u);
  for (const auto& row : rep.divergence)
    for (double d : row) EXPECT_EQ(d, 0.0);
  EXPECT_THROW(run_reproducibility(f.prepared.train, f.corpus, cfg, {4}, f.setup, {0.0}, Feature::f0), UsageError);
}

TEST(Reproducibility, TrainingFailureNamesSeed) {
  const auto& f = fixture();
  auto records = f.prepared.train;
  records[0].normalized[2].f0 = std::nan("");
  afp::TrainConfig cfg;
  cfg.max_iterations = 5;
  cfg.dims = f.ckpt.dims;
  try {
    run_reproducibility(records, f.corpus, cfg, {17, 18}, f.setup, {0.0}, Feature::f0);
    FAIL() << "expected failure";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("seed 17"), std::string::npos) << e.what();
  }
}

TEST(Report, JsonRoundTripAndCsv) {
  const auto& f = fixture();
  const auto r = run_temporal_precision(f.corpus, f.ckpt, f.setup, 0.5, 2, {0.0, 0.5}, Feature::energy);
  const auto back = experiment_report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(to_json(back), to_json(r));
  const auto csv = to_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 3);
  EXPECT_EQ(csv.rfind("shift,measured_feature,group,mean,std\n", 0), 0u);
  EXPECT_THROW(experiment_report_from_json(nlohmann::json{{"kind", "x"}}), DataError);
}

TEST(Plot, SvgHasOnePointPerGridLevel) {
  const auto& f = fixture();
  const auto r = run_disentanglement(f.corpus, f.ckpt, f.setup, {0.0, 0.25, 0.5}, Feature::f0);
  const auto svg = experiment_svg(r);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  std::size_t circles = 0;
  for (std::size_t p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++circles;
  EXPECT_EQ(circles, 3u * 3u);
  const auto box = box_plot_svg(mushra_analyze(kept_records(six_listener_fixture(),
                                                            filter_listeners(six_listener_fixture()))));
  std::size_t rects = 0;
  for (std::size_t p = box.find("<rect x="); p != std::string::npos; p = box.find("<rect x=", p + 1)) ++rects;
  EXPECT_EQ(rects, 3u);
}

TEST(Prepare, StatsComeFromTrainingSplitOnly) {
  synth::CorpusGeneratorConfig g;
  g.n_utterances = 8;
  const auto raw = records_from_generated(synth::generate_corpus(g), {});
  const auto p = prepare_records(raw, 0.25, 1);
  EXPECT_EQ(p.train.size(), 6u);
  EXPECT_EQ(p.validation.size(), 2u);
  const auto expected = features::build_stats_table(p.train);
  EXPECT_EQ(p.stats.version, expected.version);
  for (const auto& r : p.validation) EXPECT_EQ(r.stats_version, p.stats.version);
}

}  // namespace
}  // namespace prosoctl::eval
