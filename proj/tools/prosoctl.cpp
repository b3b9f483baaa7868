// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// prosoctl: batch entry point for extraction, training, editing,
// synthesis, experiments and the editing service.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "prosoctl/afp/checkpoint.hpp"
#include "prosoctl/afp/gradcheck.hpp"
#include "prosoctl/afp/train.hpp"
#include "prosoctl/corpus/corpus.hpp"
#include "prosoctl/dsp/griffin_lim.hpp"
#include "prosoctl/dsp/wav.hpp"
#include "prosoctl/eval/experiments.hpp"
#include "prosoctl/eval/mushra.hpp"
#include "prosoctl/eval/plot.hpp"
#include "prosoctl/eval/prepare.hpp"
#include "prosoctl/eval/report.hpp"
#include "prosoctl/service/http.hpp"

namespace fs = std::filesystem;
using namespace prosoctl;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  int verbosity = 0;
};

Globals g;

void log(const std::string& msg) { std::cerr << "[prosoctl] " << msg << "\n"; }

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw DataError("cannot write " + path);
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + ": empty list");
  return out;
}

// Options shared by synthesis-backed commands.
struct SynthOptions {
  std::string timbre;
  double crossfade_ms = 4.0;
  int sample_rate = dsp::kDefaultSampleRate;
  int hop = dsp::kDefaultHop;
  int fft_size = dsp::kDefaultFftSize;
  double f0_min = 60.0;
  double f0_max = 400.0;

  void add(CLI::App* c, bool with_grid = true) {
    c->add_option("--timbre", timbre, "Timbre table JSON (default: built-in)")->check(CLI::ExistingFile);
    c->add_option("--crossfade-ms", crossfade_ms, "Crossfade between phones")->capture_default_str();
    if (with_grid) {
      c->add_option("--sample-rate", sample_rate, "Sample rate of generated audio")->capture_default_str();
      c->add_option("--hop", hop, "Frame hop in samples")->capture_default_str();
    }
    c->add_option("--fft-size", fft_size, "Analysis window length")->capture_default_str();
    c->add_option("--f0-min", f0_min, "Lowest F0 in Hz")->capture_default_str();
    c->add_option("--f0-max", f0_max, "Highest F0 in Hz")->capture_default_str();
  }

  eval::RenderSetup setup(int sr, int hop_samples) const {
    eval::RenderSetup s;
    s.synth.sample_rate = sr;
    s.synth.hop = hop_samples;
    if (!timbre.empty()) s.synth.timbre = synth::load_timbre_table(timbre, sr);
    s.synth.crossfade_ms = crossfade_ms;
    s.synth.f0_min = f0_min;
    s.synth.f0_max = f0_max;
    s.synth.seed = derive_seed(g.seed, "synth");
    s.analysis.fft_size = fft_size;
    s.analysis.f0.f0_min = f0_min;
    s.analysis.f0.f0_max = f0_max;
    s.jobs = g.jobs;
    return s;
  }
  eval::RenderSetup setup() const { return setup(sample_rate, hop); }
};

struct TrainOptions {
  std::uint64_t iterations = 5000;
  double learning_rate = 1e-3;
  double lr_final_fraction = 1.0;
  double clip_norm = 5.0;
  std::uint64_t log_every = 500;

  void add(CLI::App* c) {
    c->add_option("--iterations", iterations, "Training iterations")->capture_default_str();
    c->add_option("--lr", learning_rate, "Adam learning rate")->capture_default_str();
    c->add_option("--lr-final-fraction", lr_final_fraction, "Final learning rate as a fraction")
        ->capture_default_str();
    c->add_option("--clip-norm", clip_norm, "Gradient clipping norm")->capture_default_str();
    c->add_option("--log-every", log_every, "Loss logging interval")->capture_default_str();
  }
  afp::TrainConfig config(std::uint64_t seed) const {
    afp::TrainConfig cfg;
    cfg.max_iterations = iterations;
    cfg.learning_rate = learning_rate;
    cfg.lr_final_fraction = lr_final_fraction;
    cfg.clip_norm = clip_norm;
    cfg.log_every = log_every;
    cfg.seed = seed;
    return cfg;
  }
};

afp::TrainLogger train_logger() {
  return [](std::uint64_t it, double loss) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "iteration %llu mean L1 %.6f", static_cast<unsigned long long>(it), loss);
    log(buf);
  };
}

// Inputs for the experiment and service commands: either files on disk or
// a generated corpus with a freshly trained predictor.
struct CorpusOptions {
  std::string features;
  std::string stats;
  std::string ckpt;
  std::string split;
  std::size_t synthetic = 20;
  TrainOptions train;
  SynthOptions synth;

  void add(CLI::App* c) {
    c->add_option("--features", features, "Feature record directory (default: generated corpus)")
        ->check(CLI::ExistingDirectory);
    c->add_option("--stats", stats, "Speaker statistics JSON")->check(CLI::ExistingFile);
    c->add_option("--ckpt", ckpt, "AFP checkpoint (default: train one)")->check(CLI::ExistingFile);
    c->add_option("--split", split, "Split JSON; experiments use its validation list")->check(CLI::ExistingFile);
    c->add_option("--synthetic", synthetic, "Utterances to generate when --features is absent")
        ->capture_default_str();
    train.add(c);
    synth.add(c);
  }

  struct Loaded {
    std::vector<corpus::FeatureRecord> train;
    std::vector<corpus::FeatureRecord> eval;
    features::StatsTable stats;
    afp::AfpCheckpoint ckpt;
    eval::RenderSetup setup;
  };

  Loaded load(bool need_ckpt = true) const {
    Loaded out;
    out.setup = synth.setup();
    if (features.empty()) {
      if (!stats.empty() || !split.empty()) throw UsageError("--stats and --split need --features");
      synth::CorpusGeneratorConfig gc;
      gc.n_utterances = synthetic;
      gc.seed = derive_seed(g.seed, "corpus");
      gc.synth = out.setup.synth;
      log("generating " + std::to_string(synthetic) + " utterances");
      const auto prepared =
          eval::prepare_records(eval::records_from_generated(synth::generate_corpus(gc), out.setup.analysis, g.jobs), 0.0,
                                g.seed);
      out.train = prepared.train;
      out.eval = prepared.train;
      out.stats = prepared.stats;
    } else {
      if (stats.empty()) throw UsageError("--features needs --stats");
      out.stats = features::load_stats(stats);
      auto records = corpus::load_feature_dir(features, out.stats.version);
      for (auto& r : records)
        if (r.normalized.empty()) features::normalize_record(r, out.stats);
      std::set<std::string> train_ids, eval_ids;
      if (!split.empty()) {
        const auto j = read_json(split);
        for (const auto& id : j.at("train")) train_ids.insert(id.get<std::string>());
        for (const auto& id : j.at("validation")) eval_ids.insert(id.get<std::string>());
      }
      for (const auto& r : records) {
        if (split.empty() || train_ids.count(r.utterance_id)) out.train.push_back(r);
        if (split.empty() || eval_ids.count(r.utterance_id)) out.eval.push_back(r);
      }
    }
    if (!need_ckpt) return out;
    if (!ckpt.empty()) {
      out.ckpt = afp::load_checkpoint(ckpt);
    } else {
      const auto cfg = train.config(derive_seed(g.seed, "afp"));
      log("training AFP for " + std::to_string(cfg.max_iterations) + " iterations");
      out.ckpt = afp::afp_train(out.train, cfg, train_logger()).checkpoint;
    }
    if (out.ckpt.stats_version != out.stats.version)
      throw VersionError("checkpoint stats " + out.ckpt.stats_version + " differ from " + out.stats.version);
    return out;
  }
};

void write_report(const nlohmann::json& j, const std::string& out, const std::string& csv, const std::string& text_csv) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_text(out, j.dump(2) + "\n");
    log("wrote " + out);
  }
  if (!csv.empty()) {
    write_text(csv, text_csv);
    log("wrote " + csv);
  }
}

corpus::FeatureRecord predicted_record(const corpus::Utterance& utt, const afp::AfpCheckpoint& ckpt,
                                       const features::StatsTable& stats, const synth::TimbreTable& timbre) {
  corpus::FeatureRecord r;
  r.utterance_id = utt.utterance_id;
  r.speaker_id = utt.speaker_id;
  r.phones = utt.phones;
  for (auto& p : r.phones) p.span.reset();
  r.normalized = afp::afp_forward(r.phones, r.speaker_id, ckpt);
  r.raw = eval::to_raw(r.normalized, r.phones, stats.at(r.speaker_id), timbre);
  r.stats_version = stats.version;
  return r;
}

void describe(CLI::App* sub) {
  std::string cfg = sub->config_to_str(g.verbosity > 0, false);
  std::replace(cfg.begin(), cfg.end(), '\n', ' ');
  log(sub->get_name() + ": seed=" + std::to_string(g.seed) + " jobs=" + std::to_string(g.jobs) + " " + cfg);
}

// Sets PROSOCTL_<NAME> as the environment fallback of every long option.
void add_env_names(CLI::App* app) {
  for (CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames()[0] == "help") continue;
    std::string name = opt->get_lnames()[0];
    std::string env = "PROSOCTL_";
    for (char c : name) env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (opt->get_envname().empty()) opt->envname(env);
  }
  for (CLI::App* sub : app->get_subcommands({})) add_env_names(sub);
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prosoctl: per-phone prosody extraction, prediction, editing and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Config file (TOML/INI key = value; sections per subcommand)");
  app.add_option("--seed", g.seed, "Root seed; all randomness derives from it")->capture_default_str();
  app.add_option("--jobs,-j", g.jobs, "Worker threads for utterance-level parallelism")
      ->capture_default_str()->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", g.verbosity, "More logging");

  std::function<void()> action;

  // make-corpus
  auto* mk = app.add_subcommand("make-corpus", "Generate a synthetic aligned corpus (wav + alignment JSON)");
  std::string mk_out;
  std::size_t mk_n = 20, mk_min_words = 2, mk_max_words = 4;
  SynthOptions mk_synth;
  mk->add_option("--out", mk_out, "Output directory")->required();
  mk->add_option("--n", mk_n, "Number of utterances")->capture_default_str();
  mk->add_option("--min-words", mk_min_words)->capture_default_str();
  mk->add_option("--max-words", mk_max_words)->capture_default_str();
  mk_synth.add(mk);
  mk->callback([&] {
    action = [&] {
      synth::CorpusGeneratorConfig gc;
      gc.n_utterances = mk_n;
      gc.min_words = mk_min_words;
      gc.max_words = mk_max_words;
      gc.seed = derive_seed(g.seed, "corpus");
      gc.synth = mk_synth.setup().synth;
      fs::create_directories(mk_out);
      log("generating " + std::to_string(mk_n) + " utterances");
      for (const auto& u : synth::generate_corpus(gc)) {
        auto aligned = u.utterance;
        aligned.audio_path = u.utterance.utterance_id + ".wav";
        dsp::write_wav((fs::path(mk_out) / *aligned.audio_path).string(), u.audio);
        corpus::save_alignment((fs::path(mk_out) / (aligned.utterance_id + ".json")).string(), aligned);
      }
      log("wrote " + std::to_string(mk_n) + " utterances to " + mk_out);
    };
  });

  // ctm2json
  auto* ctm = app.add_subcommand("ctm2json", "Convert a CTM phone alignment to alignment JSON documents");
  std::string ctm_in, ctm_out, ctm_speaker;
  int ctm_sr = dsp::kDefaultSampleRate, ctm_hop = dsp::kDefaultHop;
  ctm->add_option("--ctm", ctm_in, "CTM file")->required()->check(CLI::ExistingFile);
  ctm->add_option("--speaker", ctm_speaker, "Speaker id")->required();
  ctm->add_option("--out", ctm_out, "Output directory")->required();
  ctm->add_option("--sample-rate", ctm_sr)->capture_default_str();
  ctm->add_option("--hop", ctm_hop)->capture_default_str();
  ctm->callback([&] {
    action = [&] {
      fs::create_directories(ctm_out);
      const auto utts = corpus::parse_ctm(read_text(ctm_in), ctm_speaker, ctm_sr, ctm_hop);
      for (const auto& u : utts) corpus::save_alignment((fs::path(ctm_out) / (u.utterance_id + ".json")).string(), u);
      log("wrote " + std::to_string(utts.size()) + " alignments");
    };
  });

  // extract
  auto* ex = app.add_subcommand("extract", "Per-phone F0, energy and duration from aligned audio");
  std::string ex_align, ex_wav, ex_out;
  SynthOptions ex_analysis;
  ex->add_option("--align", ex_align, "Alignment JSON directory")->required()->check(CLI::ExistingDirectory);
  ex->add_option("--wav", ex_wav, "WAV directory")->required()->check(CLI::ExistingDirectory);
  ex->add_option("--out", ex_out, "Feature record directory")->required();
  ex_analysis.add(ex, false);
  ex->callback([&] {
    action = [&] {
      const auto utts = corpus::load_alignment_dir(ex_align);
      if (utts.empty()) throw DataError("no alignment documents in " + ex_align);
      fs::create_directories(ex_out);
      std::vector<corpus::FeatureRecord> records(utts.size());
      const auto analysis = ex_analysis.setup().analysis;
      parallel_for(utts.size(), g.jobs, [&](std::size_t i) {
        const auto& u = utts[i];
        const auto wav = fs::path(ex_wav) / u.audio_path.value_or(u.utterance_id + ".wav");
        records[i] = features::extract_record(dsp::read_wav(wav.string()), u, analysis);
      });
      for (const auto& r : records)
        corpus::store_feature_record((fs::path(ex_out) / corpus::record_filename(r.utterance_id)).string(), r);
      log("wrote " + std::to_string(records.size()) + " feature records to " + ex_out);
    };
  });

  // stats
  auto* st = app.add_subcommand("stats", "Fit per-speaker statistics on the training split and normalize records");
  std::string st_features, st_out, st_split;
  double st_holdout = 0.0;
  st->add_option("--features", st_features, "Feature record directory (rewritten in place)")
      ->required()->check(CLI::ExistingDirectory);
  st->add_option("--out", st_out, "Statistics JSON")->required();
  st->add_option("--holdout", st_holdout, "Validation fraction per speaker")->capture_default_str();
  st->add_option("--split-out", st_split, "Write the train/validation split here");
  st->callback([&] {
    action = [&] {
      auto raw = corpus::load_feature_dir(st_features);
      for (auto& r : raw) {
        r.normalized.clear();
        r.stats_version.clear();
      }
      const auto p = eval::prepare_records(raw, st_holdout, g.seed);
      features::save_stats(st_out, p.stats);
      for (const auto& r : p.all())
        corpus::store_feature_record((fs::path(st_features) / corpus::record_filename(r.utterance_id)).string(), r);
      if (!st_split.empty()) {
        nlohmann::json j{{"train", nlohmann::json::array()}, {"validation", nlohmann::json::array()}};
        for (const auto& r : p.train) j["train"].push_back(r.utterance_id);
        for (const auto& r : p.validation) j["validation"].push_back(r.utterance_id);
        write_text(st_split, j.dump(2) + "\n");
      }
      log("stats " + p.stats.version + ": " + std::to_string(p.train.size()) + " train, " +
          std::to_string(p.validation.size()) + " validation");
    };
  });

  // train-afp
  auto* tr = app.add_subcommand("train-afp", "Train the acoustic feature predictor");
  std::string tr_features, tr_stats, tr_out, tr_split, tr_trace;
  TrainOptions tr_opts;
  tr->add_option("--features", tr_features, "Normalized feature record directory")
      ->required()->check(CLI::ExistingDirectory);
  tr->add_option("--stats", tr_stats, "Statistics JSON")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--split", tr_split, "Split JSON; trains on its train list")->check(CLI::ExistingFile);
  tr->add_option("--trace", tr_trace, "Write the per-iteration loss trace (JSON)");
  tr_opts.add(tr);
  tr->callback([&] {
    action = [&] {
      CorpusOptions co;
      co.features = tr_features;
      co.stats = tr_stats;
      co.split = tr_split;
      const auto loaded = co.load(false);
      const auto result = afp::afp_train(loaded.train, tr_opts.config(derive_seed(g.seed, "afp")), train_logger());
      afp::save_checkpoint(tr_out, result.checkpoint);
      if (!tr_trace.empty()) write_text(tr_trace, nlohmann::json(result.loss_trace).dump() + "\n");
      char buf[96];
      std::snprintf(buf, sizeof(buf), "final training L1 %.6f", afp::afp_evaluate(result.checkpoint, loaded.train));
      log(buf);
      log("wrote " + tr_out);
    };
  });

  // predict
  auto* pr = app.add_subcommand("predict", "Predict per-phone features for an utterance");
  std::string pr_align, pr_ckpt, pr_stats, pr_out, pr_timbre;
  pr->add_option("--align", pr_align, "Alignment JSON (phones and speaker; spans ignored)")
      ->required()->check(CLI::ExistingFile);
  pr->add_option("--ckpt", pr_ckpt, "AFP checkpoint")->required()->check(CLI::ExistingFile);
  pr->add_option("--stats", pr_stats, "Statistics JSON")->required()->check(CLI::ExistingFile);
  pr->add_option("--timbre", pr_timbre, "Timbre table (voicing of raw F0)")->check(CLI::ExistingFile);
  pr->add_option("--out", pr_out, "Output feature record")->required();
  pr->callback([&] {
    action = [&] {
      const auto utt = corpus::load_alignment(pr_align);
      const auto stats = features::load_stats(pr_stats);
      const auto timbre = pr_timbre.empty() ? synth::builtin_timbres() : synth::load_timbre_table(pr_timbre, utt.sample_rate);
      const auto ckpt = afp::load_checkpoint(pr_ckpt);
      corpus::store_feature_record(pr_out, predicted_record(utt, ckpt, stats, timbre));
      log("wrote " + pr_out);
    };
  });

  // edit
  auto* ed = app.add_subcommand("edit", "Apply an edit script to normalized features");
  std::string ed_in, ed_script, ed_stats, ed_out, ed_timbre;
  ed->add_option("--features", ed_in, "Feature record (normalized)")->required()->check(CLI::ExistingFile);
  ed->add_option("--script", ed_script, "Edit script JSON")->required()->check(CLI::ExistingFile);
  ed->add_option("--stats", ed_stats, "Statistics JSON")->required()->check(CLI::ExistingFile);
  ed->add_option("--timbre", ed_timbre, "Timbre table (voicing of raw F0)")->check(CLI::ExistingFile);
  ed->add_option("--out", ed_out, "Output feature record")->required();
  ed->callback([&] {
    action = [&] {
      const auto stats = features::load_stats(ed_stats);
      auto r = corpus::load_feature_record(ed_in, stats.version);
      if (r.normalized.empty()) throw DataError(ed_in + ": record holds no normalized features");
      const auto script = control::parse_edit_script(read_text(ed_script));
      const auto timbre = ed_timbre.empty() ? synth::builtin_timbres() : synth::load_timbre_table(ed_timbre, dsp::kDefaultSampleRate);
      r.normalized = control::apply_edits(r.normalized, script, r.phones, stats.at(r.speaker_id));
      r.raw = eval::to_raw(r.normalized, r.phones, stats.at(r.speaker_id), timbre);
      corpus::store_feature_record(ed_out, r);
      log("applied " + std::to_string(script.ops.size()) + " ops; wrote " + ed_out);
    };
  });

  // synth
  auto* sy = app.add_subcommand("synth", "Render a feature record to audio");
  std::string sy_in, sy_stats, sy_out;
  int sy_gl = 0;
  SynthOptions sy_opts;
  sy->add_option("--features", sy_in, "Feature record (normalized)")->required()->check(CLI::ExistingFile);
  sy->add_option("--stats", sy_stats, "Statistics JSON")->required()->check(CLI::ExistingFile);
  sy->add_option("--out", sy_out, "Output stem (writes <stem>.wav and <stem>.json)")->required();
  sy->add_option("--griffin-lim", sy_gl, "Also write <stem>.gl.wav from the mel spectrogram with N iterations")
      ->capture_default_str();
  sy_opts.add(sy);
  sy->callback([&] {
    action = [&] {
      const auto stats = features::load_stats(sy_stats);
      const auto r = corpus::load_feature_record(sy_in, stats.version);
      if (r.normalized.empty()) throw DataError(sy_in + ": record holds no normalized features");
      const auto setup = sy_opts.setup();
      const auto utt = eval::utterance_of(r, setup.synth.sample_rate, setup.synth.hop);
      const auto rendered = eval::render(utt, r.normalized, stats.at(r.speaker_id), setup);
      for (const auto& w : rendered.rendition.warnings)
        log("warning: phone " + std::to_string(w.phone_index) + ": " + w.message);
      if (fs::path(sy_out).has_parent_path()) fs::create_directories(fs::path(sy_out).parent_path());
      synth::export_rendition(rendered.rendition, sy_out);
      if (sy_gl > 0) {
        const auto mel = synth::render_mel(rendered.rendition, setup.analysis.fft_size);
        dsp::write_wav(sy_out + ".gl.wav", dsp::griffin_lim(mel, sy_gl, derive_seed(g.seed, "griffin_lim")));
      }
      log("wrote " + sy_out + ".wav");
    };
  });

  // eval-disentangle
  auto* ed_dis = app.add_subcommand("eval-disentangle", "Shift one feature's whole contour and measure all three");
  CorpusOptions dis_corpus;
  std::string dis_feature = "f0", dis_grid = "-0.5,-0.25,0,0.25,0.5", dis_out, dis_csv;
  dis_corpus.add(ed_dis);
  ed_dis->add_option("--feature", dis_feature, "f0, energy or duration")->capture_default_str();
  ed_dis->add_option("--grid", dis_grid, "Shift grid in speaker std units")->capture_default_str();
  ed_dis->add_option("--out", dis_out, "Report JSON (default: stdout)");
  ed_dis->add_option("--csv", dis_csv, "Flat CSV report");
  ed_dis->callback([&] {
    action = [&] {
      const auto feature = eval::feature_from_string(dis_feature);
      const auto grid = parse_list(dis_grid, "--grid");
      const auto l = dis_corpus.load();
      const auto corpus = eval::eval_corpus(l.eval, l.stats, l.setup.synth.sample_rate, l.setup.synth.hop);
      auto report = eval::run_disentanglement(corpus, l.ckpt, l.setup, grid, feature);
      report.seeds.push_back(g.seed);
      write_report(eval::to_json(report), dis_out, dis_csv, eval::to_csv(report));
    };
  });

  // eval-temporal
  auto* tp = app.add_subcommand("eval-temporal", "Edit a random subset of stressed vowels and measure locality");
  CorpusOptions tp_corpus;
  std::string tp_feature = "f0", tp_grid = "-0.5,-0.25,0,0.25,0.5", tp_out, tp_csv;
  double tp_fraction = 0.5;
  tp_corpus.add(tp);
  tp->add_option("--feature", tp_feature, "f0, energy or duration")->capture_default_str();
  tp->add_option("--grid", tp_grid, "Shift grid in speaker std units")->capture_default_str();
  tp->add_option("--fraction", tp_fraction, "Fraction of stressed vowels edited")->capture_default_str();
  tp->add_option("--out", tp_out, "Report JSON (default: stdout)");
  tp->add_option("--csv", tp_csv, "Flat CSV report");
  tp->callback([&] {
    action = [&] {
      const auto feature = eval::feature_from_string(tp_feature);
      const auto grid = parse_list(tp_grid, "--grid");
      const auto l = tp_corpus.load();
      const auto corpus = eval::eval_corpus(l.eval, l.stats, l.setup.synth.sample_rate, l.setup.synth.hop);
      const auto report = eval::run_temporal_precision(corpus, l.ckpt, l.setup, tp_fraction,
                                                       derive_seed(g.seed, "temporal"), grid, feature);
      write_report(eval::to_json(report), tp_out, tp_csv, eval::to_csv(report));
    };
  });

  // eval-repro
  auto* rp = app.add_subcommand("eval-repro", "Train one predictor per seed and compare disentanglement curves");
  CorpusOptions rp_corpus;
  std::string rp_feature = "f0", rp_grid = "-0.5,-0.25,0,0.25,0.5", rp_seeds = "1,2,3", rp_out;
  rp_corpus.add(rp);
  rp->add_option("--feature", rp_feature, "f0, energy or duration")->capture_default_str();
  rp->add_option("--grid", rp_grid, "Shift grid in speaker std units")->capture_default_str();
  rp->add_option("--seeds", rp_seeds, "Training seeds")->capture_default_str();
  rp->add_option("--out", rp_out, "Report JSON (default: stdout)");
  rp->callback([&] {
    action = [&] {
      if (!rp_corpus.ckpt.empty()) throw UsageError("eval-repro trains its own checkpoints; drop --ckpt");
      const auto feature = eval::feature_from_string(rp_feature);
      const auto grid = parse_list(rp_grid, "--grid");
      std::vector<std::uint64_t> seeds;
      for (double s : parse_list(rp_seeds, "--seeds")) {
        if (s < 0 || s != std::floor(s)) throw UsageError("--seeds: seeds must be non-negative integers");
        seeds.push_back(static_cast<std::uint64_t>(s));
      }
      const auto l = rp_corpus.load(false);
      const auto corpus = eval::eval_corpus(l.eval, l.stats, l.setup.synth.sample_rate, l.setup.synth.hop);
      const auto report = eval::run_reproducibility(l.train, corpus, rp_corpus.train.config(0), seeds, l.setup, grid, feature);
      log(std::string("signs agree: ") + (report.signs_agree ? "yes" : "no") +
          ", all monotone: " + (report.all_monotone ? "yes" : "no"));
      write_report(eval::to_json(report), rp_out, "", "");
    };
  });

  // mushra
  auto* mu = app.add_subcommand("mushra", "Filter listeners and test rating differences between systems");
  std::string mu_ratings, mu_out, mu_svg;
  double mu_alpha = 0.05;
  mu->add_option("--ratings", mu_ratings, "Ratings CSV")->required()->check(CLI::ExistingFile);
  mu->add_option("--alpha", mu_alpha, "Significance level")->capture_default_str();
  mu->add_option("--out", mu_out, "Summary JSON (default: stdout)");
  mu->add_option("--svg", mu_svg, "Box plot SVG");
  mu->callback([&] {
    action = [&] {
      const auto records = eval::load_ratings_csv(mu_ratings);
      const auto filter = eval::filter_listeners(records);
      log("kept " + std::to_string(filter.kept.size()) + " of " +
          std::to_string(filter.kept.size() + filter.rejected.size()) + " listeners");
      const auto summary = eval::mushra_analyze(eval::kept_records(records, filter), mu_alpha);
      nlohmann::json j = eval::to_json(summary);
      j["listeners"] = eval::to_json(filter);
      write_report(j, mu_out, "", "");
      if (!mu_svg.empty()) write_text(mu_svg, eval::box_plot_svg(summary));
    };
  });

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Compare AFP gradients with central finite differences");
  std::size_t gc_configs = 20;
  double gc_eps = 1e-5, gc_tol = 1e-4;
  gc->add_option("--configs", gc_configs, "Random small configurations")->capture_default_str();
  gc->add_option("--epsilon", gc_eps, "Finite-difference step")->capture_default_str();
  gc->add_option("--tolerance", gc_tol, "Pass threshold on the max relative error")->capture_default_str();
  gc->callback([&] {
    action = [&] {
      const auto r = afp::gradient_check_suite(g.seed, gc_configs, gc_eps);
      std::printf("max_relative_error %.3e (%s[%zu], analytic %.6e, numeric %.6e, %zu parameters)\n",
                  r.max_relative_error, r.worst_tensor.c_str(), r.worst_index, r.worst_analytic, r.worst_numeric,
                  r.parameters_checked);
      if (!(r.max_relative_error < gc_tol)) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "gradient check failed: %.3e >= %.3e", r.max_relative_error, gc_tol);
        throw NumericalError(buf);
      }
    };
  });

  // plot
  auto* pl = app.add_subcommand("plot", "SVG charts from experiment reports or ratings");
  std::string pl_report, pl_ratings, pl_out;
  pl->add_option("--report", pl_report, "Experiment or reproducibility report JSON")->check(CLI::ExistingFile);
  pl->add_option("--ratings", pl_ratings, "Ratings CSV (box plot of kept listeners)")->check(CLI::ExistingFile);
  pl->add_option("--out", pl_out, "SVG path")->required();
  pl->callback([&] {
    action = [&] {
      if (pl_report.empty() == pl_ratings.empty()) throw UsageError("plot needs exactly one of --report, --ratings");
      std::string svg;
      if (!pl_ratings.empty()) {
        const auto records = eval::load_ratings_csv(pl_ratings);
        svg = eval::box_plot_svg(eval::mushra_analyze(eval::kept_records(records, eval::filter_listeners(records))));
      } else {
        const auto j = read_json(pl_report);
        if (j.value("kind", "") == "reproducibility") {
          eval::ReproducibilityReport r;
          for (const auto& rj : j.at("per_seed")) r.per_seed.push_back(eval::experiment_report_from_json(rj));
          svg = eval::reproducibility_svg(r);
        } else {
          svg = eval::experiment_svg(eval::experiment_report_from_json(j));
        }
      }
      write_text(pl_out, svg);
      log("wrote " + pl_out);
    };
  });

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP JSON API for interactive editing sessions");
  CorpusOptions sv_corpus;
  service::HttpConfig sv_http;
  std::string sv_snapshots;
  sv_corpus.add(sv);
  sv->add_option("--host", sv_http.host, "Bind address")->capture_default_str();
  sv->add_option("--port", sv_http.port, "Port")->capture_default_str();
  sv->add_option("--cors-origin", sv_http.cors_origin, "Allowed browser origin")->capture_default_str();
  sv->add_option("--snapshots", sv_snapshots, "Directory for session JSON snapshots");
  sv->callback([&] {
    action = [&] {
      auto l = sv_corpus.load();
      auto ctx = service::make_context(l.eval, l.stats, l.ckpt, l.setup);
      service::SessionManager sessions(std::move(ctx), sv_snapshots.empty() ? std::nullopt
                                                                           : std::optional<fs::path>(sv_snapshots));
      if (const auto n = sessions.load_snapshots()) log("restored " + std::to_string(n) + " sessions");
      httplib::Server server;
      service::install_routes(server, sessions, sv_http);
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      if (!server.bind_to_port(sv_http.host, sv_http.port))
        throw UsageError("cannot bind " + sv_http.host + ":" + std::to_string(sv_http.port));
      log("listening on http://" + sv_http.host + ":" + std::to_string(sv_http.port));
      server.listen_after_bind();
      g_server = nullptr;
    };
  });

  add_env_names(&app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    for (CLI::App* sub : app.get_subcommands()) describe(sub);
    if (action) action();
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
