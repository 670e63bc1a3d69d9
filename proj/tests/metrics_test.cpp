#include <gtest/gtest.h>

#include <random>

#include "ipakit/error.hpp"
#include "ipakit/metrics.hpp"
#include "oracles/edit_scripts.hpp"

using namespace ipakit;
using namespace ipakit::metrics;
using ipakit::ipa::Phone;
using ipakit::ipa::PhoneSequence;

namespace {

const std::vector<std::string> kAlphabet{"p", "b", "t", "a", "i"};

PhoneSequence random_seq(std::mt19937_64& rng, std::size_t len) {
  PhoneSequence s;
  for (std::size_t i = 0; i < len; ++i) s.phones.push_back(Phone{kAlphabet[rng() % kAlphabet.size()], {}});
  return s;
}

PhoneSequence seq(std::initializer_list<const char*> bases) {
  PhoneSequence s;
  for (const char* b : bases) s.phones.push_back(Phone{b, {}});
  return s;
}

double oracle_pfer(const PhoneSequence& h, const PhoneSequence& r) {
  const auto& table = features::bundled_feature_table();
  return oracle::min_edit_script_cost(h.phones.size(), r.phones.size(), [&](std::size_t i, std::size_t j) {
    return features::feature_distance(h.phones[i], r.phones[j], table);
  });
}

}  // namespace

TEST(Pfer, IdentityAndEmpty) {
  const auto& table = features::bundled_feature_table();
  auto x = seq({"p", "a", "t"});
  EXPECT_EQ(pfer(x, x, table), 0.0);
  EXPECT_EQ(pfer(PhoneSequence{}, x, table), 3.0);
  EXPECT_EQ(pfer(x, PhoneSequence{}, table), 3.0);
}

TEST(Pfer, NotNormalizedByLength) {
  const auto& table = features::bundled_feature_table();
  EXPECT_DOUBLE_EQ(pfer(seq({"b", "a"}), seq({"p", "a"}), table), 1.0 / 24.0);
  EXPECT_DOUBLE_EQ(pfer(seq({"b", "a", "b", "a"}), seq({"p", "a", "p", "a"}), table), 2.0 / 24.0);
}

TEST(Pfer, MatchesEditScriptOracle) {
  std::mt19937_64 rng(3);
  for (std::size_t m = 0; m <= 6; ++m) {
    for (std::size_t n = 0; n <= 6; ++n) {
      for (int rep = 0; rep < 5; ++rep) {
        auto h = random_seq(rng, m), r = random_seq(rng, n);
        ASSERT_NEAR(pfer(h, r, features::bundled_feature_table()), oracle_pfer(h, r), 1e-12) << m << "x" << n;
      }
    }
  }
}

TEST(Align, HypEqualsRef) {
  auto x = seq({"p", "a"});
  auto a = align(x, x, features::bundled_feature_table());
  ASSERT_EQ(a.ops.size(), 2u);
  for (const auto& op : a.ops) EXPECT_EQ(op.kind, EditKind::kMatch);
  EXPECT_EQ(a.total_cost, 0.0);
}

TEST(Align, SingleInsert) {
  auto a = align(seq({"a"}), PhoneSequence{}, features::bundled_feature_table());
  ASSERT_EQ(a.ops.size(), 1u);
  EXPECT_EQ(a.ops[0], (EditOp{EditKind::kInsert, 0, kNoIndex, 1.0}));
  EXPECT_EQ(a.total_cost, 1.0);
}

TEST(Align, TieBreakPrefersSubstituteThenDelete) {
  // Unit sub cost, hyp "x", ref "y": sub (1) vs del+ins (2): substitute.
  auto sub = [](std::size_t, std::size_t) { return std::pair{false, 1.0}; };
  auto a = align_units(1, 1, sub);
  ASSERT_EQ(a.ops.size(), 1u);
  EXPECT_EQ(a.ops[0].kind, EditKind::kSubstitute);
  // hyp "a", ref "ab" where cost ties between deleting either ref unit.
  auto same_first = [](std::size_t, std::size_t j) { return std::pair{j == 0, j == 0 ? 0.0 : 1.0}; };
  auto b = align_units(1, 2, same_first);
  ASSERT_EQ(b.ops.size(), 2u);
  EXPECT_EQ(b.ops[0].kind, EditKind::kMatch);
  EXPECT_EQ(b.ops[1].kind, EditKind::kDelete);
}

TEST(Align, CostMatchesPferOnRandomPairs) {
  std::mt19937_64 rng(5);
  features::FeatureCache cache(features::bundled_feature_table());
  for (int i = 0; i < 500; ++i) {
    auto h = random_seq(rng, rng() % 9), r = random_seq(rng, rng() % 9);
    const auto a = align(h, r, cache);
    const double p = pfer(h, r, cache);
    ASSERT_NEAR(a.total_cost, p, 1e-12);
    double sum = 0.0;
    std::size_t hi = 0, ri = 0;
    for (const auto& op : a.ops) {
      sum += op.cost;
      if (op.kind != EditKind::kDelete) ASSERT_EQ(op.hyp, hi++);
      if (op.kind != EditKind::kInsert) ASSERT_EQ(op.ref, ri++);
    }
    EXPECT_EQ(hi, h.phones.size());
    EXPECT_EQ(ri, r.phones.size());
    EXPECT_NEAR(sum, a.total_cost, 1e-12);
    EXPECT_LE(p, static_cast<double>(std::max(h.phones.size(), r.phones.size())) + 1e-12);
  }
}

TEST(ErrorSummary, SingleDeletion) {
  features::FeatureCache cache(features::bundled_feature_table());
  auto hyp = ipa::bundled_parser().parse("a");
  auto ref = ipa::bundled_parser().parse("aː");
  auto sym = align_utterance(hyp, ref, cache, AlignmentLevel::kSymbol);
  auto summary = error_summary(std::span(&sym, 1));
  EXPECT_EQ(summary.deletions, (std::map<std::string, std::size_t>{{"ː", 1}}));
  EXPECT_EQ(summary.type_totals, (TypeTotals{0, 1, 0}));
}

TEST(ErrorSummary, RepeatedSubstitution) {
  features::FeatureCache cache(features::bundled_feature_table());
  std::vector<AlignedUtterance> aligned;
  for (int i = 0; i < 3; ++i) aligned.push_back(align_utterance(seq({"ɑ"}), seq({"a"}), cache));
  auto summary = error_summary(aligned);
  EXPECT_EQ(summary.substitutions.size(), 1u);
  EXPECT_EQ((summary.substitutions.at({"a", "ɑ"})), 3u);
  EXPECT_EQ(summary.type_totals.substitutions, 3u);
}

TEST(ErrorSummary, MergeIsCountAddition) {
  features::FeatureCache cache(features::bundled_feature_table());
  std::mt19937_64 rng(8);
  std::vector<AlignedUtterance> all;
  for (int i = 0; i < 40; ++i) all.push_back(align_utterance(random_seq(rng, 4), random_seq(rng, 5), cache));
  auto whole = error_summary(all);
  auto left = error_summary(std::span(all).first(17));
  auto right = error_summary(std::span(all).subspan(17));
  right.merge(left);
  EXPECT_EQ(right.type_totals, whole.type_totals);
  EXPECT_EQ(right.substitutions, whole.substitutions);
  EXPECT_EQ(right.insertions, whole.insertions);
  EXPECT_EQ(right.deletions, whole.deletions);
  std::size_t subs = 0;
  for (const auto& [_, c] : whole.substitutions) subs += c;
  EXPECT_EQ(subs, whole.type_totals.substitutions);
}

TEST(SymbolUnits, SplitDiacritics) {
  auto units = symbol_units(ipa::bundled_parser().parse("tʰa"));
  EXPECT_EQ(units, (std::vector<std::string>{"t", "ʰ", "a"}));
}

TEST(TopK, OrdersByCountThenKey) {
  std::map<std::string, std::size_t> counts{{"a", 2}, {"b", 5}, {"c", 2}, {"d", 1}};
  auto top = top_k(counts, 3);
  ASSERT_EQ(top.size(), 3u);
  EXPECT_EQ(top[0].first, "b");
  EXPECT_EQ(top[1].first, "a");
  EXPECT_EQ(top[2].first, "c");
}

TEST(Aggregate, Mean) {
  EXPECT_EQ(aggregate(std::vector<double>{2.0}), 2.0);
  EXPECT_EQ(aggregate(std::vector<double>{0, 0, 0}), 0.0);
  EXPECT_EQ(aggregate(std::vector<double>{1, 2, 3, 4}), 2.5);
  EXPECT_THROW(aggregate(std::vector<double>{}), Error);
}
