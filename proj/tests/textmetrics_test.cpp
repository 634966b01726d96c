#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "kgv/error.hpp"
#include "kgv/textmetrics.hpp"
#include "support.hpp"

namespace kgv {
namespace {

using Tokens = std::vector<std::string>;

TEST(MetricTokens, KeepsPricesAndPercentages) {
  EXPECT_EQ(metric_tokens("Basic is $7.2, (per user)!"), (Tokens{"basic", "is", "$7.2", "per", "user"}));
  EXPECT_EQ(metric_tokens("Up 50%. Done."), (Tokens{"up", "50%", "done"}));
  EXPECT_EQ(metric_tokens("east.net isn't 3.14."), (Tokens{"eastnet", "isnt", "3.14"}));
  EXPECT_TRUE(metric_tokens(" ... ").empty());
}

TEST(MetricTokens, Idempotent) {
  std::mt19937_64 rng(5);
  const std::string alphabet = "ab1$%.,;'- 9Z";
  for (int i = 0; i < 500; ++i) {
    std::string s;
    for (int j = 0; j < 20; ++j) s += alphabet[rng() % alphabet.size()];
    Tokens once = metric_tokens(s);
    std::string joined;
    for (const auto& t : once) joined += t + " ";
    EXPECT_EQ(metric_tokens(joined), once) << s;
  }
}

TEST(RougeL, Examples) {
  auto same = rouge_l("the cat sat", "the cat sat");
  EXPECT_DOUBLE_EQ(same.precision, 1.0);
  EXPECT_DOUBLE_EQ(same.recall, 1.0);
  EXPECT_DOUBLE_EQ(same.f, 1.0);
  EXPECT_DOUBLE_EQ(rouge_l("a b", "c d").f, 0.0);
  EXPECT_DOUBLE_EQ(rouge_l("", "c d").f, 0.0);
  auto r = rouge_l("a b c d", "a c d e");
  EXPECT_DOUBLE_EQ(r.precision, 0.75);
  EXPECT_DOUBLE_EQ(r.recall, 0.75);
  EXPECT_DOUBLE_EQ(r.f, 0.75);
}

TEST(RougeL, BetaWeightsRecall) {
  // LCS 2, |c| = 2, |r| = 4: P = 1, R = 0.5, F = 2.44 * 0.5 / (0.5 + 1.44)
  auto r = rouge_l("a b", "a b c d");
  EXPECT_NEAR(r.f, 2.44 * 0.5 / 1.94, 1e-12);
}

TEST(RougeL, SymmetricLcs) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    Tokens a, b;
    for (int j = 0, n = static_cast<int>(rng() % 9); j < n; ++j) a.push_back(std::string(1, static_cast<char>('a' + rng() % 4)));
    for (int j = 0, n = static_cast<int>(rng() % 9); j < n; ++j) b.push_back(std::string(1, static_cast<char>('a' + rng() % 4)));
    EXPECT_EQ(lcs_length(a, b), lcs_length(b, a));
  }
  auto ab = rouge_l("a b c", "a c d e");
  auto ba = rouge_l("a c d e", "a b c");
  EXPECT_DOUBLE_EQ(ab.precision, ba.recall);
  EXPECT_DOUBLE_EQ(ab.recall, ba.precision);
}

TEST(PorterStem, MatchesReferenceStems) {
  // Reference stems produced by an independent Porter implementation.
  std::ifstream in(testing::fixture_path("porter_stems.txt"));
  std::string word, stem;
  int n = 0;
  while (in >> word >> stem) {
    EXPECT_EQ(porter_stem(word), stem) << word;
    ++n;
  }
  EXPECT_GT(n, 80);
}

TEST(Meteor, IdenticalIsAnalytic) {
  for (int m = 1; m <= 20; ++m) {
    std::string s;
    for (int i = 0; i < m; ++i) s += "w" + std::to_string(i) + " ";
    EXPECT_NEAR(meteor(s, s), 1.0 - 0.5 * std::pow(1.0 / m, 3), 1e-12) << m;
  }
}

TEST(Meteor, StemStageAligns) {
  auto d = meteor_detail("prices decrease yearly", "price decreases yearly");
  EXPECT_EQ(d.matches, 3u);
  EXPECT_EQ(d.chunks, 1u);
  EXPECT_NEAR(d.score, 1.0 - 0.5 / 27.0, 1e-12);
}

TEST(Meteor, HandComputedFragmentation) {
  // matches a, b, c; candidate order a c b gives chunks {a}, {c}, {b} -> 3.
  // P = 3/3, R = 3/4, Fmean = 10*0.75/(0.75+9) ; penalty 0.5*(3/3)^3.
  auto d = meteor_detail("a c b", "a b c d");
  EXPECT_EQ(d.matches, 3u);
  EXPECT_EQ(d.chunks, 3u);
  double fmean = 10 * 1.0 * 0.75 / (0.75 + 9 * 1.0);
  EXPECT_NEAR(d.score, fmean * 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(meteor("x y", "p q"), 0.0);
  EXPECT_DOUBLE_EQ(meteor("", "p q"), 0.0);
}

TEST(EvaluateDataset, Aggregates) {
  std::vector<EvalRecord> recs = {{"b", "", "", "x y", "x y"}, {"a", "", "", "x y", "p q"}};
  auto res = evaluate_dataset(recs);
  ASSERT_EQ(res.records.size(), 2u);
  EXPECT_EQ(res.records[0].id, "a");
  EXPECT_DOUBLE_EQ(res.aggregate.rouge_l_f, 0.5);
  EXPECT_FALSE(res.aggregate.groundedness.has_value());
}

TEST(EvaluateDataset, MeanOverPresentValuesOnly) {
  std::vector<EvalRecord> recs = {{"judged", "", "", "x", "x"}, {"skipped", "", "", "x", "x"}};
  EvalOptions opts;
  opts.groundedness = [](const EvalRecord& r) -> std::optional<int> {
    if (r.id == "judged") return 4;
    return std::nullopt;
  };
  auto res = evaluate_dataset(recs, opts);
  EXPECT_EQ(res.aggregate.groundedness, std::optional<double>(4.0));
  EXPECT_EQ(res.records[1].scores.judge_failures, (std::vector<std::string>{"groundedness"}));
}

TEST(EvaluateDataset, DuplicateIdsRejected) {
  std::vector<EvalRecord> recs = {{"a", "", "", "x", "x"}, {"a", "", "", "x", "x"}, {"b", "", "", "x", "x"}};
  try {
    evaluate_dataset(recs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("a"), std::string::npos);
  }
}

TEST(EvaluateDataset, WorkersDoNotChangeOutput) {
  std::vector<EvalRecord> recs;
  for (int i = 0; i < 40; ++i)
    recs.push_back({"r" + std::to_string(i), "", "", "one two three " + std::to_string(i), "one three " + std::to_string(i % 7)});
  EvalOptions one, many;
  many.workers = 8;
  std::ostringstream a, b;
  write_results(a, evaluate_dataset(recs, one));
  write_results(b, evaluate_dataset(recs, many));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str().find("\"__aggregate__\""), std::string::npos);
}

TEST(LoadDataset, ParsesAndReportsLine) {
  std::istringstream ok("{\"id\": \"1\", \"reference\": \"r\", \"candidate\": \"c\", \"context\": \"x\"}\n\n");
  auto recs = load_dataset(ok);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].context, "x");
  std::istringstream bad("{\"id\": \"1\", \"reference\": \"r\", \"candidate\": \"c\"}\n{\"id\": \"2\"}\n");
  try {
    load_dataset(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

}  // namespace
}  // namespace kgv
