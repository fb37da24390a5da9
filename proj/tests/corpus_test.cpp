#include <doctest.h>

#include <random>
#include <sstream>

#include "homegate/corpus.hpp"
#include "homegate/text.hpp"
#include "support/test_util.hpp"

using namespace homegate;
using corpus::Label;
using corpus::LoadMode;

TEST_CASE("taxonomy covers the 12 types with the fixed label mapping") {
  const auto& types = corpus::taxonomy();
  REQUIRE(types.size() == 12);
  for (int type_id = 0; type_id < 12; ++type_id) {
    CHECK(types[static_cast<std::size_t>(type_id)].type_id == type_id);
  }
  for (int accept_id : {0, 8, 9, 10, 11}) {
    CHECK(corpus::expected_label(accept_id) == Label::Accept);
  }
  for (int reject_id : {1, 2, 3, 4, 5, 6, 7}) {
    CHECK(corpus::expected_label(reject_id) == Label::Reject);
  }
}

TEST_CASE("expected_label rejects out-of-range ids") {
  CHECK_THROWS_AS(corpus::expected_label(12), corpus::CorpusError);
  CHECK_THROWS_AS(corpus::expected_label(-1), corpus::CorpusError);
}

TEST_CASE("label serialization is lowercase out, case-insensitive in") {
  CHECK(corpus::to_string(Label::Accept) == "accept");
  CHECK(corpus::to_string(Label::Reject) == "reject");
  CHECK(corpus::label_from_string("ACCEPT") == Label::Accept);
  CHECK(corpus::label_from_string("Reject") == Label::Reject);
  CHECK(corpus::label_from_string(" reject ") == Label::Reject);
  CHECK(!corpus::label_from_string("maybe").has_value());
}

TEST_CASE("parse_sample handles a plain supported command") {
  const auto sample =
      corpus::parse_sample(R"({"id":"s1","type_id":9,"text":"关掉空调","label":"accept"})");
  CHECK(sample.label == Label::Accept);
  CHECK(sample.text == "关掉空调");
  CHECK(sample.history.empty());
  CHECK(!sample.household_id.has_value());
}

TEST_CASE("parse_sample splits legacy inline history into turns") {
  const auto sample = corpus::parse_sample(
      R"({"id":"s2","type_id":9,"text":"打开厨房灯光","label":"accept","history":"来客人了~~~~~搞定"})");
  REQUIRE(sample.history.size() == 2);
  CHECK(sample.history[0].speaker == corpus::Speaker::User);
  CHECK(sample.history[0].text == "来客人了");
  CHECK(sample.history[1].speaker == corpus::Speaker::Assistant);
  CHECK(sample.history[1].text == "搞定");
}

TEST_CASE("parse_sample reads structured history with timestamps") {
  const auto sample = corpus::parse_sample(
      R"({"id":"s3","type_id":11,"text":"油烟机时间按键","label":"accept",)"
      R"("history":[{"speaker":"user","text":"时间按键","ts":100},)"
      R"({"speaker":"assistant","text":"您能说得再详细些吗","ts":101}]})");
  REQUIRE(sample.history.size() == 2);
  CHECK(sample.history[0].timestamp == 100);
  CHECK(sample.history[1].speaker == corpus::Speaker::Assistant);
}

TEST_CASE("parse_sample error paths") {
  CHECK_THROWS_WITH_AS(
      corpus::parse_sample(R"({"id":"x","type_id":12,"text":"hi","label":"accept"})"),
      doctest::Contains("unknown type"), corpus::CorpusError);
  CHECK_THROWS_AS(corpus::parse_sample("not json"), corpus::CorpusError);
  CHECK_THROWS_AS(corpus::parse_sample(R"({"id":"x","type_id":9,"label":"accept"})"),
                  corpus::CorpusError);
  CHECK_THROWS_AS(corpus::parse_sample(R"({"id":"x","type_id":9,"text":"  ","label":"accept"})"),
                  corpus::CorpusError);
  CHECK_THROWS_AS(corpus::parse_sample(R"({"id":"x","type_id":9,"text":"hi","label":"maybe"})"),
                  corpus::CorpusError);
  // History out of chronological order.
  CHECK_THROWS_AS(corpus::parse_sample(
                      R"({"id":"x","type_id":9,"text":"hi","label":"accept",)"
                      R"("history":[{"speaker":"user","text":"a","ts":5},)"
                      R"({"speaker":"user","text":"b","ts":3}]})"),
                  corpus::CorpusError);
}

TEST_CASE("label mismatch is an error in benchmark mode, a warning in raw mode") {
  const std::string line = R"({"id":"m1","type_id":5,"text":"空调调到40摄氏度","label":"accept"})";
  CHECK_THROWS_AS(corpus::parse_sample(line, LoadMode::Benchmark), corpus::CorpusError);
  const auto sample = corpus::parse_sample(line, LoadMode::RawLog);
  CHECK(sample.label == Label::Accept);

  std::istringstream in(line + "\n");
  const auto raw = corpus::parse_corpus(in, LoadMode::RawLog);
  CHECK(raw.samples.size() == 1);
  CHECK(raw.errors.empty());
  REQUIRE(raw.warnings.size() == 1);
  CHECK(raw.warnings[0].id == "m1");
}

TEST_CASE("unknown fields survive a serialize round trip") {
  const std::string line =
      R"({"id":"u1","type_id":8,"text":"推荐下江苏宿迁的小吃","label":"accept","source":"log-42","score":0.5})";
  const auto sample = corpus::parse_sample(line);
  CHECK(sample.extra.contains("source"));
  const auto reparsed = corpus::parse_sample(corpus::serialize_sample(sample));
  CHECK(reparsed.extra == sample.extra);
  CHECK(reparsed.text == sample.text);
}

TEST_CASE("load_corpus never aborts mid-file and carries line numbers") {
  testutil::TempDir dir;
  SUBCASE("all valid") {
    testutil::write_file(dir.file("ok.jsonl"),
                         R"({"id":"a","type_id":9,"text":"关掉空调","label":"accept"})"
                         "\n"
                         R"({"id":"b","type_id":5,"text":"空调调到40摄氏度","label":"reject"})"
                         "\n"
                         R"({"id":"c","type_id":0,"text":"小美小美","label":"accept"})"
                         "\n");
    const auto result = corpus::load_corpus(dir.file("ok.jsonl"));
    CHECK(result.samples.size() == 3);
    CHECK(result.errors.empty());
  }
  SUBCASE("one malformed line among three") {
    testutil::write_file(dir.file("bad.jsonl"),
                         R"({"id":"a","type_id":9,"text":"关掉空调","label":"accept"})"
                         "\n"
                         "{oops\n"
                         R"({"id":"c","type_id":0,"text":"小美小美","label":"accept"})"
                         "\n");
    const auto result = corpus::load_corpus(dir.file("bad.jsonl"));
    CHECK(result.samples.size() == 2);
    REQUIRE(result.errors.size() == 1);
    CHECK(result.errors[0].line_no == 2);
  }
  SUBCASE("empty file") {
    testutil::write_file(dir.file("empty.jsonl"), "");
    const auto result = corpus::load_corpus(dir.file("empty.jsonl"));
    CHECK(result.samples.empty());
    CHECK(result.errors.empty());
  }
  SUBCASE("unreadable file") {
    CHECK_THROWS_AS(corpus::load_corpus(dir.file("missing.jsonl")), corpus::CorpusError);
  }
}

TEST_CASE("corpus_stats counts exactly") {
  SUBCASE("empty list") {
    const auto stats = corpus::corpus_stats({});
    CHECK(stats.total == 0);
    CHECK(stats.per_type_count.empty());
  }
  SUBCASE("hand-counted synthetic list") {
    std::vector<corpus::Sample> samples;
    for (int i = 0; i < 5; ++i) {
      corpus::Sample s;
      s.id = "a" + std::to_string(i);
      s.type_id = 9;
      s.label = Label::Accept;
      s.text = "x";
      samples.push_back(s);
    }
    for (int i = 0; i < 5; ++i) {
      corpus::Sample s;
      s.id = "b" + std::to_string(i);
      s.type_id = 2;
      s.label = Label::Reject;
      s.text = "x";
      samples.push_back(s);
    }
    const auto stats = corpus::corpus_stats(samples);
    CHECK(stats.total == 10);
    CHECK(stats.per_type_count.at(9) == 5);
    CHECK(stats.per_type_count.at(2) == 5);
    CHECK(stats.per_type_count.size() == 2);
  }
}

TEST_CASE("property: stats survive a serialize/parse round trip") {
  std::mt19937 rng(20240601);
  std::uniform_int_distribution<int> type_dist(0, 11);
  for (int round = 0; round < 50; ++round) {
    std::vector<corpus::Sample> samples;
    std::uniform_int_distribution<int> size_dist(0, 40);
    const int n = size_dist(rng);
    for (int i = 0; i < n; ++i) {
      corpus::Sample s;
      s.id = "r" + std::to_string(round) + "-" + std::to_string(i);
      s.type_id = type_dist(rng);
      s.label = corpus::expected_label(s.type_id);
      s.text = testutil::random_utterance(rng);
      if (rng() % 3 == 0) {
        s.history.push_back({corpus::Speaker::User, testutil::random_utterance(rng), {}});
        s.history.push_back({corpus::Speaker::Assistant, testutil::random_utterance(rng), {}});
      }
      if (rng() % 4 == 0) {
        s.household_id = "h" + std::to_string(rng() % 5);
      }
      samples.push_back(std::move(s));
    }
    const auto before = corpus::corpus_stats(samples);

    std::size_t check_total = 0;
    for (const auto& [type_id, count] : before.per_type_count) {
      check_total += count;
    }
    CHECK(check_total == before.total);

    std::ostringstream serialized;
    for (const auto& s : samples) {
      serialized << corpus::serialize_sample(s) << "\n";
    }
    std::istringstream in(serialized.str());
    const auto loaded = corpus::parse_corpus(in, LoadMode::Benchmark);
    REQUIRE(loaded.errors.empty());
    const auto after = corpus::corpus_stats(loaded.samples);
    CHECK(after.total == before.total);
    CHECK(after.per_type_count == before.per_type_count);
    for (const auto& s : loaded.samples) {
      CHECK(s.label == corpus::expected_label(s.type_id));
    }
  }
}

TEST_CASE("property: legacy history split/join is byte-exact") {
  std::mt19937 rng(7);
  for (int round = 0; round < 200; ++round) {
    std::uniform_int_distribution<int> segments(1, 6);
    std::vector<std::string> parts;
    const int n = segments(rng);
    std::string joined;
    for (int i = 0; i < n; ++i) {
      const std::string part = testutil::random_utterance(rng);
      parts.push_back(part);
      if (i > 0) {
        joined += "~~~~~";
      }
      joined += part;
    }
    const auto turns = corpus::split_legacy_history(joined);
    REQUIRE(turns.size() == parts.size());
    for (std::size_t i = 0; i < turns.size(); ++i) {
      CHECK(turns[i].text == parts[i]);
      CHECK(turns[i].speaker ==
            (i % 2 == 0 ? corpus::Speaker::User : corpus::Speaker::Assistant));
    }
    CHECK(corpus::join_legacy_history(turns) == joined);
  }
  CHECK_THROWS_AS(corpus::split_legacy_history("a~~~~~"), corpus::CorpusError);
  CHECK_THROWS_AS(corpus::split_legacy_history(""), corpus::CorpusError);
}

TEST_CASE("canonical text folds NFC forms and fullwidth whitespace") {
  // "é" precomposed vs e + combining acute
  CHECK(text::canonical("café") == text::canonical("café"));
  CHECK(text::canonical("　打开灯 ") == "打开灯");
  CHECK(text::canonical("  \t\n") == "");
}
