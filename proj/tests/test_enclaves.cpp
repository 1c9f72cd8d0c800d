#include <gtest/gtest.h>

#include "opal/enclaves.hpp"

using namespace opal;

namespace {

constexpr std::int64_t kDay = 86400;

RuleExtractor extractor() {
  return RuleExtractor({"Ana Lee", "Ben Ode", "Cy Park"}, {"atlas", "borealis"});
}

}  // namespace

TEST(Tokenize, LowercasesAndSplits) {
  EXPECT_EQ(tokenize("Hello, World! week-of 2025-01-06"),
            (std::vector<std::string>{"hello", "world", "week-of", "2025-01-06"}));
  EXPECT_TRUE(tokenize("  ...  ").empty());
}

TEST(Embedder, UnitNormAndDeterministic) {
  HashingEmbedder e(64);
  auto a = e.embed("quarterly budget review");
  EXPECT_NEAR(a.norm(), 1.0f, 1e-5);
  EXPECT_TRUE(a.isApprox(e.embed("Quarterly BUDGET review")));
  EXPECT_EQ(e.embed("the and of").norm(), 0.0f);
  EXPECT_TRUE(e.embed("budget").isApprox(e.embed("the budget")));
}

TEST(Embedder, SharedTokensAreCloser) {
  HashingEmbedder e(64);
  auto q = e.embed("zorvex plimtar budget");
  auto near = e.embed("notes zorvex plimtar meeting");
  auto far = e.embed("holiday travel plans");
  EXPECT_GT(q.dot(near), q.dot(far));
}

TEST(Dates, IsoRoundTrip) {
  EXPECT_EQ(parse_iso_date("1970-01-02"), kDay);
  EXPECT_EQ(parse_iso_date("2025-01-06"), 1736121600);
  EXPECT_EQ(format_iso_date(1736121600 + 5000), "2025-01-06");
  EXPECT_EQ(parse_iso_date("2025-02-30"), -1);
  EXPECT_EQ(parse_iso_date("2025/01/06"), -1);
}

TEST(Extractor, FullNameIsHighConfidence) {
  auto f = extractor().extract("what did Ana Lee send", 0);
  EXPECT_EQ(f.persons, (std::set<std::string>{"ana_lee"}));
  EXPECT_EQ(f.person_conf, Confidence::High);
}

TEST(Extractor, FirstNameIsLowConfidence) {
  auto f = extractor().extract("what did ben send", 0);
  EXPECT_EQ(f.persons, (std::set<std::string>{"ben_ode"}));
  EXPECT_EQ(f.person_conf, Confidence::Low);
}

TEST(Extractor, ProjectModalityAndDate) {
  auto f = extractor().extract("meeting notes on project Atlas on 2025-01-07", 0);
  EXPECT_EQ(f.project, "atlas");
  EXPECT_EQ(f.modality, Modality::Meeting);
  ASSERT_TRUE(f.temporal);
  EXPECT_EQ(f.temporal->lo, 1736121600 + kDay);
  EXPECT_EQ(f.temporal->hi, 1736121600 + 2 * kDay - 1);
  EXPECT_EQ(f.temporal_conf, Confidence::High);
}

TEST(Extractor, WeekOf) {
  auto f = extractor().extract("chat in the week of 2025-01-06", 0);
  EXPECT_EQ(f.modality, Modality::Message);
  ASSERT_TRUE(f.temporal);
  EXPECT_EQ(f.temporal->hi - f.temporal->lo, 7 * kDay - 1);
}

TEST(Extractor, RelativeWindowsAreLowConfidence) {
  const std::int64_t now = 1736121600 + 3 * kDay + 5 * 3600;
  auto f = extractor().extract("emails from yesterday", now);
  ASSERT_TRUE(f.temporal);
  EXPECT_EQ(f.temporal->lo, 1736121600 + 2 * kDay);
  EXPECT_EQ(f.temporal_conf, Confidence::Low);
  f = extractor().extract("anything last month", now);
  EXPECT_EQ(f.temporal->lo, now - 30 * kDay);
}

TEST(Extractor, ProjectNeedsKeyword) {
  EXPECT_FALSE(extractor().extract("atlas status", 0).project);
  EXPECT_FALSE(extractor().extract("project zeta", 0).project);
  EXPECT_TRUE(extractor().extract("hello", 0).empty());
}

TEST(TestEnclaves, SynthesizeAndSummarize) {
  TestEnclaves e(32, extractor(), 6);
  EXPECT_EQ(e.dim(), 32);
  EXPECT_EQ(e.synthesize("q", {}), TestEnclaves::kNoMemory);
  auto s = e.synthesize("q", {{4, "alpha"}, {9, "beta"}});
  EXPECT_NE(s.find("[4] alpha"), std::string::npos);
  EXPECT_NE(s.find("[9] beta"), std::string::npos);
  EXPECT_EQ(e.summarize({"a b c d", "e f g h", "i j"}), "summary: a b e f i j");
}
