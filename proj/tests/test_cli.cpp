// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "prosoctl/afp/checkpoint.hpp"
#include "prosoctl/corpus/corpus.hpp"
#include "prosoctl/dsp/wav.hpp"
#include "prosoctl/features/features.hpp"

namespace fs = std::filesystem;
using namespace prosoctl;

namespace {

class Cli : public ::testing::Test {
 protected:
  static fs::path dir;

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / ("prosoctl_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  static void TearDownTestSuite() { fs::remove_all(dir); }

  static int run(const std::string& args, const std::string& env = "") {
    const std::string cmd =
        "cd '" + dir.string() + "' && " + env + " '" PROSOCTL_BIN "' " + args + " >out.txt 2>err.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  static std::string slurp(const std::string& name) {
    std::ifstream in(dir / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  static void put(const std::string& name, const std::string& text) { std::ofstream(dir / name) << text; }

  // make-corpus, extract and stats once for the suite.
  static void pipeline() {
    if (fs::exists(dir / "stats.json")) return;
    ASSERT_EQ(run("--seed 5 make-corpus --out corpus --n 6"), 0) << slurp("err.txt");
    ASSERT_EQ(run("extract --align corpus --wav corpus --out feats"), 0) << slurp("err.txt");
    ASSERT_EQ(run("stats --features feats --out stats.json --holdout 0.3 --split-out split.json"), 0)
        << slurp("err.txt");
  }
};

fs::path Cli::dir;

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_NE(slurp("out.txt").find("eval-disentangle"), std::string::npos);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("no-such-command"), 1);
  EXPECT_EQ(run("extract --align missing --wav missing --out x"), 1);
  EXPECT_EQ(run("eval-disentangle --feature pitch --synthetic 2 --iterations 1"), 1);
  EXPECT_NE(slurp("err.txt").find("unknown feature"), std::string::npos);
  EXPECT_EQ(run("eval-disentangle --grid 0,abc --synthetic 2 --iterations 1"), 1);
}

TEST_F(Cli, ExtractStatsPipeline) {
  pipeline();
  const auto stats = features::load_stats((dir / "stats.json").string());
  const auto records = corpus::load_feature_dir((dir / "feats").string(), stats.version);
  ASSERT_EQ(records.size(), 6u);
  for (const auto& r : records) {
    ASSERT_EQ(r.normalized.size(), r.phones.size());
    EXPECT_EQ(r.stats_version, stats.version);
  }
  const auto split = nlohmann::json::parse(slurp("split.json"));
  EXPECT_EQ(split["train"].size() + split["validation"].size(), 6u);
  EXPECT_GT(split["validation"].size(), 0u);
}

TEST_F(Cli, TrainPredictEditSynth) {
  pipeline();
  ASSERT_EQ(run("--seed 2 train-afp --features feats --stats stats.json --split split.json --out ck.json "
                "--iterations 50 --trace trace.json"),
            0)
      << slurp("err.txt");
  EXPECT_EQ(nlohmann::json::parse(slurp("trace.json")).size(), 50u);
  EXPECT_NO_THROW(afp::load_checkpoint((dir / "ck.json").string()));

  ASSERT_EQ(run("predict --align corpus/utt0001.json --ckpt ck.json --stats stats.json --out pred.json"), 0)
      << slurp("err.txt");
  const auto pred = corpus::load_feature_record((dir / "pred.json").string());
  EXPECT_EQ(pred.normalized.size(), pred.phones.size());
  EXPECT_EQ(pred.raw.size(), pred.phones.size());

  put("script.json", R"({"ops":[{"selector":"all_phones","feature":"energy","action":{"shift_sigma":0.5}}]})");
  ASSERT_EQ(run("edit --features pred.json --script script.json --stats stats.json --out edited.json"), 0)
      << slurp("err.txt");
  const auto edited = corpus::load_feature_record((dir / "edited.json").string());
  for (std::size_t i = 0; i < pred.phones.size(); ++i) {
    EXPECT_EQ(edited.normalized[i][Feature::f0], pred.normalized[i][Feature::f0]);
    EXPECT_EQ(edited.normalized[i][Feature::duration], pred.normalized[i][Feature::duration]);
    const double delta = edited.normalized[i][Feature::energy] - pred.normalized[i][Feature::energy];
    EXPECT_NEAR(delta, pred.phones[i].kind == corpus::PhoneKind::phone ? 0.5 : 0.0, 1e-12) << i;
  }

  ASSERT_EQ(run("synth --features edited.json --stats stats.json --out render/edited --griffin-lim 4"), 0)
      << slurp("err.txt");
  const auto wav = dsp::read_wav((dir / "render/edited.wav").string());
  EXPECT_GT(wav.samples.size(), 0u);
  EXPECT_TRUE(fs::exists(dir / "render/edited.json"));
  EXPECT_TRUE(fs::exists(dir / "render/edited.gl.wav"));
}

TEST_F(Cli, DataErrorsExitTwo) {
  pipeline();
  put("bad_script.json", R"({"ops":[{"selector":"everything","feature":"f0","action":{"shift_sigma":1}}]})");
  EXPECT_EQ(run("edit --features feats/utt0000.features.json --script bad_script.json --stats stats.json --out x.json"),
            2);
  put("garbage.json", "{not json");
  EXPECT_EQ(run("predict --align corpus/utt0000.json --ckpt garbage.json --stats stats.json --out x.json"), 2);
  put("bad.csv", "listener_id,screen_id,system,rating,is_hidden_reference\nL1,s1,a,55,false\n");
  EXPECT_EQ(run("mushra --ratings bad.csv"), 2);
}

TEST_F(Cli, GradcheckExitCodes) {
  EXPECT_EQ(run("gradcheck --seed 7 --configs 3"), 0) << slurp("err.txt");
  EXPECT_NE(slurp("out.txt").find("max_relative_error"), std::string::npos);
  EXPECT_EQ(run("gradcheck --seed 7 --configs 2 --tolerance 1e-30"), 3);
}

TEST_F(Cli, ConfigFileAndEnvironment) {
  put("run.toml", "seed = 9\n[gradcheck]\nconfigs = 2\n");
  EXPECT_EQ(run("--config run.toml gradcheck"), 0) << slurp("err.txt");
  EXPECT_NE(slurp("err.txt").find("seed=9"), std::string::npos);
  EXPECT_EQ(run("gradcheck --configs 2", "PROSOCTL_TOLERANCE=1e-30"), 3);
  EXPECT_EQ(run("gradcheck --configs 2", "PROSOCTL_SEED=4"), 0);
  EXPECT_NE(slurp("err.txt").find("seed=4"), std::string::npos);
}

TEST_F(Cli, ExperimentReports) {
  pipeline();
  ASSERT_EQ(run("--seed 3 train-afp --features feats --stats stats.json --out ck2.json --iterations 200"), 0);
  ASSERT_EQ(run("eval-disentangle --features feats --stats stats.json --ckpt ck2.json --feature f0 "
                "--grid=-0.5,0,0.5 --out dis.json --csv dis.csv"),
            0)
      << slurp("err.txt");
  const auto j = nlohmann::json::parse(slurp("dis.json"));
  EXPECT_EQ(j["grid"].size(), 3u);
  const auto csv = slurp("dis.csv");
  EXPECT_EQ(csv.rfind("shift,measured_feature,group,mean,std\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 3);

  ASSERT_EQ(run("plot --report dis.json --out dis.svg"), 0) << slurp("err.txt");
  EXPECT_EQ(slurp("dis.svg").rfind("<svg", 0), 0u);
  EXPECT_EQ(run("plot --out x.svg"), 1);

  ASSERT_EQ(run("eval-temporal --features feats --stats stats.json --ckpt ck2.json --feature duration "
                "--grid=-0.5,0.5 --out tp.json"),
            0)
      << slurp("err.txt");
  const auto tp = nlohmann::json::parse(slurp("tp.json"));
  EXPECT_EQ(tp["kind"], "temporal_precision");
}

TEST_F(Cli, MushraSummary) {
  std::string csv = "screen_id,listener_id,system,rating,is_hidden_reference\n";
  const char* listeners[] = {"A", "B", "C"};
  for (int l = 0; l < 3; ++l)
    for (int s = 0; s < 2; ++s) {
      const std::string row = std::string(",") + listeners[l] + ",";
      csv += "s" + std::to_string(s) + row + "ref,100,true\n";
      csv += "s" + std::to_string(s) + row + "x," + std::to_string(60 + 10 * l) + ",false\n";
      csv += "s" + std::to_string(s) + row + "y," + std::to_string(30 + 10 * s) + ",false\n";
    }
  put("ratings.csv", csv);
  ASSERT_EQ(run("mushra --ratings ratings.csv --out mushra.json --svg box.svg"), 0) << slurp("err.txt");
  const auto j = nlohmann::json::parse(slurp("mushra.json"));
  EXPECT_EQ(j["listeners"]["kept"].size(), 3u);
  EXPECT_DOUBLE_EQ(j["systems"]["x"]["mean"].get<double>(), 70.0);
  EXPECT_DOUBLE_EQ(j["systems"]["y"]["mean"].get<double>(), 35.0);
  EXPECT_TRUE(fs::exists(dir / "box.svg"));
}

}  // namespace
