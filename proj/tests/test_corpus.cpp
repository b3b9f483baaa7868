// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "prosoctl/corpus/corpus.hpp"

namespace prosoctl::corpus {
namespace {

const char* kOla = R"({
  "utterance_id": "u1",
  "speaker_id": "spk",
  "sample_rate": 22050,
  "hop": 256,
  "phones": [
    {"symbol": "sil", "kind": "phone", "stressed": false, "start_frame": 0, "end_frame": 4},
    {"symbol": "o", "kind": "phone", "stressed": true, "start_frame": 5, "end_frame": 9},
    {"symbol": "l", "kind": "phone", "stressed": false, "start_frame": 10, "end_frame": 12},
    {"symbol": "a", "kind": "phone", "stressed": false, "start_frame": 13, "end_frame": 20}
  ]
})";

std::string error_of(const std::string& text) {
  try {
    parse_alignment(text, "test.json");
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

TEST(Alignment, ParsesFourPhoneUtterance) {
  const auto utt = parse_alignment(kOla);
  ASSERT_EQ(utt.phones.size(), 4u);
  EXPECT_EQ(utt.phones[0].symbol, "sil");
  EXPECT_EQ(utt.phones[1].span, (AlignmentSpan{5, 9}));
  EXPECT_EQ(utt.phones[3].span, (AlignmentSpan{13, 20}));
  EXPECT_TRUE(utt.phones[1].stressed);
  EXPECT_EQ(utt.aligned_frames(), 21u);
}

TEST(Alignment, BoundaryWithSpanRejected) {
  const std::string text = R"({"utterance_id": "u", "speaker_id": "s", "sample_rate": 22050, "hop": 256,
  "phones": [
    {"symbol": "#", "kind": "word_boundary", "stressed": false, "start_frame": 0, "end_frame": 2}
  ]})";
  const auto err = error_of(text);
  EXPECT_NE(err.find("boundary token must not carry span"), std::string::npos) << err;
  EXPECT_NE(err.find("test.json:3"), std::string::npos) << err;
}

TEST(Alignment, OverlappingSpansRejected) {
  const std::string text = R"({"utterance_id": "u", "speaker_id": "s", "sample_rate": 22050, "hop": 256,
  "phones": [
    {"symbol": "a", "kind": "phone", "stressed": false, "start_frame": 0, "end_frame": 4},
    {"symbol": "b", "kind": "phone", "stressed": false, "start_frame": 3, "end_frame": 9}
  ]})";
  const auto err = error_of(text);
  EXPECT_NE(err.find("overlaps"), std::string::npos) << err;
  EXPECT_NE(err.find(":4:"), std::string::npos) << err;
  EXPECT_NE(err.find("phones[1].start_frame"), std::string::npos) << err;
}

TEST(Alignment, SchemaViolationsNameFieldAndLine) {
  const std::string reversed = R"({"utterance_id": "u", "speaker_id": "s", "sample_rate": 22050, "hop": 256,
  "phones": [{"symbol": "a", "kind": "phone", "stressed": false, "start_frame": 5, "end_frame": 4}]})";
  EXPECT_NE(error_of(reversed).find("end_frame < start_frame"), std::string::npos);
  const std::string bad_kind = R"({"utterance_id": "u", "speaker_id": "s", "sample_rate": 22050, "hop": 256,
  "phones": [{"symbol": "a", "kind": "vowel", "stressed": false}]})";
  EXPECT_NE(error_of(bad_kind).find("phones[0].kind"), std::string::npos);
  const std::string bad_rate = "{\"utterance_id\": \"u\", \"speaker_id\": \"s\",\n\"sample_rate\": -3, \"hop\": 256, \"phones\": []}";
  const auto err = error_of(bad_rate);
  EXPECT_NE(err.find("test.json:2: field 'sample_rate'"), std::string::npos) << err;
  EXPECT_NE(error_of("{\"utterance_id\": \"u\"").find("invalid JSON"), std::string::npos);
  const std::string typo = R"({"utterance_id": "u", "speaker_id": "s", "sample_rate": 22050, "hop": 256,
  "phones": [{"symbol": "a", "kind": "phone", "stresed": false}]})";
  EXPECT_NE(error_of(typo).find("unknown field"), std::string::npos);
}

Utterance random_utterance(Rng& rng, int index) {
  Utterance u;
  u.utterance_id = "utt" + std::to_string(index);
  u.speaker_id = "spk" + std::to_string(rng.index(3));
  u.hop = 128 + static_cast<int>(rng.index(3)) * 128;
  const bool aligned = rng.uniform() < 0.8;
  std::size_t frame = rng.index(4);
  const std::size_t n = 1 + rng.index(12);
  const char* symbols[] = {"a", "e", "i", "o", "u", "m", "s", "t", "ny", "rr"};
  for (std::size_t i = 0; i < n; ++i) {
    PhoneToken t;
    const double r = rng.uniform();
    if (r < 0.15) {
      t.kind = PhoneKind::word_boundary;
      t.symbol = "#";
    } else if (r < 0.2) {
      t.kind = PhoneKind::sentence_boundary;
      t.symbol = "<s>";
    } else {
      t.symbol = symbols[rng.index(10)];
      t.stressed = is_vowel(t.symbol) && rng.uniform() < 0.4;
      if (aligned) {
        const std::size_t len = 1 + rng.index(15);
        frame += rng.index(3);
        t.span = AlignmentSpan{frame, frame + len - 1};
        frame += len;
      }
    }
    u.phones.push_back(t);
  }
  if (rng.uniform() < 0.3) u.audio_path = u.utterance_id + ".wav";
  return u;
}

TEST(Alignment, PrintParseRoundTripProperty) {
  Rng rng(2024);
  for (int i = 0; i < 200; ++i) {
    const auto u = random_utterance(rng, i);
    ASSERT_NO_THROW(validate_utterance(u));
    EXPECT_EQ(parse_alignment(print_alignment(u)), u) << print_alignment(u);
  }
}

TEST(Alignment, CtmConversion) {
  const std::string ctm =
      "u7 1 0.00 0.10 sil\n"
      "u7 1 0.10 0.12 o1\n"
      "u7 1 0.22 0.05 l\n";
  const auto utts = parse_ctm(ctm, "spk");
  ASSERT_EQ(utts.size(), 1u);
  ASSERT_EQ(utts[0].phones.size(), 3u);
  EXPECT_TRUE(utts[0].phones[1].stressed);
  EXPECT_EQ(utts[0].phones[0].span->start_frame, 0u);
  // 0.1 s at 22050/256 frames per second.
  EXPECT_EQ(utts[0].phones[1].span->start_frame, 9u);
  EXPECT_THROW(parse_ctm("u7 1 x 0.1 a\n", "spk"), DataError);
}

std::vector<UtteranceRef> refs(int speakers, int per_speaker) {
  std::vector<UtteranceRef> out;
  for (int s = 0; s < speakers; ++s)
    for (int u = 0; u < per_speaker; ++u)
      out.push_back({"s" + std::to_string(s) + "_u" + std::to_string(u), "s" + std::to_string(s)});
  return out;
}

TEST(Split, HoldsOutProportionallyPerSpeaker) {
  const auto all = refs(3, 10);
  const auto split = split_corpus(all, 0.2, 5);
  EXPECT_EQ(split.validation.size(), 6u);
  std::map<std::string, int> held;
  for (const auto& id : split.validation) held[id.substr(0, 2)]++;
  for (const auto& [spk, n] : held) EXPECT_EQ(n, 2) << spk;
  std::set<std::string> seen(split.train.begin(), split.train.end());
  for (const auto& id : split.validation) EXPECT_TRUE(seen.insert(id).second) << "overlap " << id;
  EXPECT_EQ(seen.size(), all.size());
}

TEST(Split, DeterministicForSeed) {
  const auto all = refs(2, 9);
  const auto a = split_corpus(all, 0.3, 11);
  const auto b = split_corpus(all, 0.3, 11);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
}

TEST(Split, ZeroFractionKeepsEverythingInTrain) {
  const auto split = split_corpus(refs(2, 4), 0.0, 1);
  EXPECT_TRUE(split.validation.empty());
  EXPECT_EQ(split.train.size(), 8u);
}

TEST(Split, SingleUtteranceSpeakerRejected) {
  auto all = refs(1, 4);
  all.push_back({"lonely", "other"});
  EXPECT_THROW(split_corpus(all, 0.25, 1), DataError);
}

FeatureRecord sample_record() {
  FeatureRecord r;
  r.utterance_id = "u1";
  r.speaker_id = "spk";
  r.phones = {{"<s>", PhoneKind::sentence_boundary, false, {}}, {"a", PhoneKind::phone, true, {}},
              {"s", PhoneKind::phone, false, {}}};
  r.raw = {{0, 0, 0}, {181.25, 0.0831234567891234, 9}, {0, 0.0123, 5}};
  r.normalized = {{0, 0, 0, FeatureSpace::normalized},
                  {0.123456789012345678, -1.0 / 3.0, 2.5, FeatureSpace::normalized},
                  {0, 1e-300, -0.7, FeatureSpace::normalized}};
  r.stats_version = "stats-abc";
  return r;
}

class FeatureStoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() / ("prosoctl_store_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(FeatureStoreTest, RoundTripIsBitExact) {
  const auto r = sample_record();
  const auto path = (dir_ / record_filename(r.utterance_id)).string();
  store_feature_record(path, r);
  EXPECT_EQ(load_feature_record(path, std::string("stats-abc")), r);
  const auto dir_records = load_feature_dir(dir_.string());
  ASSERT_EQ(dir_records.size(), 1u);
  EXPECT_EQ(dir_records[0], r);
}

TEST_F(FeatureStoreTest, StaleStatsVersionRejected) {
  const auto path = (dir_ / "u1.features.json").string();
  store_feature_record(path, sample_record());
  EXPECT_THROW(load_feature_record(path, std::string("stats-new")), VersionError);
}

TEST_F(FeatureStoreTest, CorruptPayloadFailsIntegrityCheck) {
  const auto path = (dir_ / "u1.features.json").string();
  store_feature_record(path, sample_record());
  std::string text;
  {
    std::ifstream in(path);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto pos = text.find("181.25");
  ASSERT_NE(pos, std::string::npos);
  text[pos + 1] = '9';
  {
    std::ofstream out(path);
    out << text;
  }
  EXPECT_THROW(load_feature_record(path), IntegrityError);
}

}  // namespace
}  // namespace prosoctl::corpus
