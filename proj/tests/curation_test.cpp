#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ipakit/curation.hpp"
#include "ipakit/error.hpp"
#include "ipakit/metrics.hpp"
#include "oracles/filter_predicate.hpp"

using namespace ipakit;
using namespace ipakit::curation;

namespace {

std::string repeat(const std::string& s, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += s;
  return out;
}

// Events: `phones` one-symbol phones of 50 ms each starting at `t`; returns
// the end time.
double add_phones(std::vector<SegmentEvent>& events, double t, std::size_t phones) {
  for (std::size_t i = 0; i < phones; ++i) {
    events.push_back({SegmentEvent::Kind::kPhone, "a", t, t + 0.05});
    t += 0.05;
  }
  return t;
}

double add_silence(std::vector<SegmentEvent>& events, double t, double length) {
  events.push_back({SegmentEvent::Kind::kSilence, "", t, t + length});
  return t + length;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ipakit_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Filter, BoundaryExamples) {
  FilterConfig cfg;
  EXPECT_EQ(check_bounds(0.5, 10, cfg).reject, RejectReason::kTooShort);
  EXPECT_EQ(check_bounds(24.5, 10, cfg).reject, RejectReason::kTooLong);
  EXPECT_EQ(check_bounds(20.0, 600, cfg).reject, RejectReason::kTooManyTokens);
  EXPECT_EQ(check_bounds(2.0, 4, cfg).reject, RejectReason::kTooFewTokens);
  EXPECT_EQ(check_bounds(2.0, 95, cfg).reject, RejectReason::kLengthRatio);
  EXPECT_TRUE(check_bounds(2.0, 90, cfg).keep());
  EXPECT_TRUE(check_bounds(1.0, 5, cfg).keep());
  EXPECT_TRUE(check_bounds(24.0, 512, cfg).keep());
}

TEST(Filter, AgreesWithIndependentPredicate) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 10000; ++i) {
    const std::int64_t ms = static_cast<std::int64_t>(rng() % 27000);
    const std::int64_t tokens = static_cast<std::int64_t>(rng() % 700);
    const auto decision = check_bounds(static_cast<double>(ms) / 1000.0, static_cast<std::size_t>(tokens), {});
    const std::string expected = oracle::filter_reason_ms(ms, tokens);
    const std::string got = decision.keep() ? "" : std::string(to_string(*decision.reject));
    ASSERT_EQ(got, expected) << ms << " ms, " << tokens << " tokens";
  }
}

TEST(Filter, TokenizesRecord) {
  const auto& tok = ipa::Tokenizer::bundled();
  UtteranceRecord rec{"r1", 2.0, "tʰa pa ka", std::nullopt, std::nullopt};
  auto d = filter_utterance(rec, tok);
  EXPECT_TRUE(d.keep());
  EXPECT_EQ(d.token_count, 7u);
  rec.ipa = "t£";
  EXPECT_EQ(filter_utterance(rec, tok).reject, RejectReason::kUntokenizableIpa);
}

TEST(Record, JsonRoundTrip) {
  UtteranceRecord rec{"a\"1", 3.25, "tʰa", "eng", std::nullopt};
  const auto line = to_json_line(rec);
  EXPECT_EQ(line, R"({"id":"a\"1","duration_s":3.25,"ipa":"tʰa","language":"eng"})");
  EXPECT_EQ(record_from_json(line), rec);
  EXPECT_THROW(record_from_json(R"({"id":"x"})"), Error);
  EXPECT_THROW(record_from_json("not json"), Error);
}

TEST(Segment, SplitsOnLongSilence) {
  std::vector<SegmentEvent> ev;
  double t = add_phones(ev, 0.0, 30);
  t = add_silence(ev, t, 0.25);
  add_phones(ev, t, 40);
  auto r = segment_silence(ev, ipa::bundled_parser());
  ASSERT_EQ(r.kept.size(), 2u);
  EXPECT_EQ(r.kept[0].phones.size(), 30u);
  EXPECT_EQ(r.kept[1].phones.size(), 40u);
  EXPECT_EQ(r.kept[1].utterance_id, "seg_1");
}

TEST(Segment, ShortSilenceDoesNotSplit) {
  std::vector<SegmentEvent> ev;
  double t = add_phones(ev, 0.0, 15);
  t = add_silence(ev, t, 0.15);
  add_phones(ev, t, 15);
  auto r = segment_silence(ev, ipa::bundled_parser());
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.kept[0].phones.size(), 30u);
}

TEST(Segment, ExactBoundaries) {
  for (std::size_t n : {19u, 20u, 50u, 51u}) {
    std::vector<SegmentEvent> ev;
    double t = add_silence(ev, 0.0, 0.3);
    t = add_phones(ev, t, n);
    add_silence(ev, t, 0.3);
    auto r = segment_silence(ev, ipa::bundled_parser());
    EXPECT_EQ(r.kept.size(), (n >= 20 && n <= 50) ? 1u : 0u) << n;
    EXPECT_EQ(r.dropped.size(), (n >= 20 && n <= 50) ? 0u : 1u) << n;
  }
  // A silence of exactly 200 ms splits; 199 ms does not.
  for (double gap : {0.2, 0.199}) {
    std::vector<SegmentEvent> ev;
    double t = add_phones(ev, 0.1, 25);
    t = add_silence(ev, t, gap);
    add_phones(ev, t, 25);
    auto r = segment_silence(ev, ipa::bundled_parser());
    EXPECT_EQ(r.kept.size(), gap >= 0.2 ? 2u : 1u) << gap;
  }
}

TEST(Segment, TooFewDroppedWithReason) {
  std::vector<SegmentEvent> ev;
  double t = add_silence(ev, 0.0, 1.0);
  t = add_phones(ev, t, 10);
  add_silence(ev, t, 1.0);
  auto r = segment_silence(ev, ipa::bundled_parser());
  EXPECT_TRUE(r.kept.empty());
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].phone_count, 10u);
}

TEST(Segment, OverlapRejected) {
  std::vector<SegmentEvent> ev{{SegmentEvent::Kind::kPhone, "a", 0.0, 0.5}, {SegmentEvent::Kind::kPhone, "a", 0.2, 0.6}};
  EXPECT_THROW(segment_silence(ev, ipa::bundled_parser()), Error);
}

TEST(Segment, EventJson) {
  auto e = event_from_json(R"({"type":"silence","start_s":1.0,"end_s":1.3})");
  EXPECT_EQ(e.kind, SegmentEvent::Kind::kSilence);
  EXPECT_DOUBLE_EQ(e.end_s, 1.3);
  EXPECT_THROW(event_from_json(R"({"type":"noise","start_s":1.0,"end_s":1.3})"), Error);
}

TEST(Chunks, TooShort) {
  try {
    random_chunks(0.5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTotalTooShort);
  }
}

TEST(Chunks, LengthsAndTiling) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> total(1.0, 300.0);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const double T = total(rng);
    auto chunks = random_chunks(T, seed);
    ASSERT_FALSE(chunks.empty());
    double cursor = 0.0;
    for (const auto& [s, e] : chunks) {
      ASSERT_EQ(s, cursor);
      ASSERT_GE(e - s, 1.0 - 1e-9);
      ASSERT_LE(e - s, 20.0);
      cursor = e;
    }
    ASSERT_LE(cursor, T);
    ASSERT_LT(T - cursor, 1.0);
    ASSERT_EQ(chunks, random_chunks(T, seed));
  }
}

TEST(Percentile, OneToTen) {
  std::map<std::string, double> scores;
  for (int i = 1; i <= 10; ++i) scores[std::to_string(i)] = i;
  std::set<std::string> expected;
  for (int i = 1; i <= 8; ++i) expected.insert(std::to_string(i));
  EXPECT_EQ(percentile_filter(scores, 80.0), expected);
  EXPECT_EQ(percentile_threshold(std::vector<double>{3, 1, 2}, 100.0), 3.0);
}

TEST(Percentile, AllEqualKeepsAll) {
  std::map<std::string, double> scores{{"a", 1.5}, {"b", 1.5}, {"c", 1.5}};
  EXPECT_EQ(percentile_filter(scores).size(), 3u);
}

TEST(Percentile, Empty) {
  EXPECT_THROW(percentile_filter({}), Error);
}

TEST(Percentile, Monotone) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  std::map<std::string, double> scores;
  for (int i = 0; i < 50; ++i) scores["u" + std::to_string(i)] = u(rng);
  auto kept = percentile_filter(scores);
  for (const auto& id : kept) {
    auto lowered = scores;
    lowered[id] -= 1.0;
    EXPECT_TRUE(percentile_filter(lowered).contains(id));
  }
}

TEST(Consistency, IdenticalAndPair) {
  const auto& parser = ipa::bundled_parser();
  const auto& table = ipa::bundled_normalization_table();
  features::FeatureCache cache(features::bundled_feature_table());
  EXPECT_EQ(pairwise_consistency({"x", {"pa", "pa", "pa"}, 0}, parser, table, cache), 0.0);
  const double pair = metrics::pfer(parser.parse("pa"), parser.parse("ba"), cache);
  EXPECT_DOUBLE_EQ(pairwise_consistency({"x", {"pa", "ba"}, 0}, parser, table, cache), pair);
}

TEST(Consistency, MeanOfSixPairs) {
  const auto& parser = ipa::bundled_parser();
  const auto& table = ipa::bundled_normalization_table();
  features::FeatureCache cache(features::bundled_feature_table());
  const std::vector<std::string> t{"pat", "bad", "tʰa", "kaːt"};
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j)
      sum += metrics::pfer(ipa::normalize(parser.parse(t[i]), table), ipa::normalize(parser.parse(t[j]), table), cache);
  EXPECT_NEAR(pairwise_consistency({"x", t, 0}, parser, table, cache), sum / 6.0, 1e-12);
}

TEST(Consistency, ErrorCarriesModelIndex) {
  const auto& parser = ipa::bundled_parser();
  features::FeatureCache cache(features::bundled_feature_table());
  try {
    pairwise_consistency({"x", {"pa", "pa", "p£"}, 0}, parser, ipa::bundled_normalization_table(), cache);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.position(), 2u);
  }
}

TEST(PseudoLabels, Json) {
  auto p = pseudo_labels_from_json(R"({"id":"u","transcriptions":["pa","ba"],"final_index":1})");
  EXPECT_EQ(p.final_index, 1u);
  EXPECT_EQ(p.transcriptions.size(), 2u);
  EXPECT_THROW(pseudo_labels_from_json(R"({"id":"u","transcriptions":["pa"]})"), Error);
  EXPECT_THROW(pseudo_labels_from_json(R"({"id":"u","transcriptions":["pa","ba"],"final_index":2})"), Error);
}

TEST(Shards, Sizes) {
  const auto dir = temp_dir("shards");
  std::vector<UtteranceRecord> records;
  for (int i = 0; i < 45; ++i) records.push_back({"r" + std::to_string(i), 1.5, "pa", std::nullopt, "src"});
  auto manifest = write_shards(records, dir, 20);
  ASSERT_EQ(manifest.shards.size(), 3u);
  EXPECT_EQ(manifest.shards[0].count, 20u);
  EXPECT_EQ(manifest.shards[1].count, 20u);
  EXPECT_EQ(manifest.shards[2].count, 5u);
  EXPECT_EQ(manifest.shards[0].path.filename(), "shard-000000.jsonl");
  EXPECT_EQ(manifest.total(), 45u);
  EXPECT_EQ(read_shards(manifest), records);
  std::filesystem::remove_all(dir);
}

TEST(Shards, DefaultSizeArithmetic) {
  const auto dir = temp_dir("shards_default");
  std::vector<UtteranceRecord> records(45000, UtteranceRecord{"r", 1.0, "a", std::nullopt, std::nullopt});
  auto manifest = write_shards(records, dir);
  ASSERT_EQ(manifest.shards.size(), 3u);
  EXPECT_EQ(manifest.shards[2].count, 5000u);
  std::filesystem::remove_all(dir);
}

TEST(Shards, EmptyWritesNothing) {
  const auto dir = temp_dir("shards_empty");
  auto manifest = write_shards({}, dir);
  EXPECT_TRUE(manifest.shards.empty());
  EXPECT_TRUE(!std::filesystem::exists(dir) || std::filesystem::is_empty(dir));
}
