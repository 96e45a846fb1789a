#include <gtest/gtest.h>

#include <random>

#include "atbilstm/metrics.hpp"

using namespace atbilstm::metrics;

namespace {

// Probability that a positive outranks a negative, ties counted half.
double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] <= 0) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] > 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

}  // namespace

TEST(RocAuc, HandWorkedExample) {
  const std::vector<double> s{0.8, 0.4, 0.6, 0.2};
  const std::vector<int> y{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(roc_auc(s, y), 0.75);
}

TEST(RocAuc, PerfectAndReversedOrderings) {
  const std::vector<double> s{0.9, 0.8, 0.1, 0.0};
  EXPECT_DOUBLE_EQ(roc_auc(s, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(s, std::vector<int>{0, 0, 1, 1}), 0.0);
}

TEST(RocAuc, AllTiedScoresGiveOneHalf) {
  const std::vector<double> s(6, 0.3);
  EXPECT_DOUBLE_EQ(roc_auc(s, std::vector<int>{1, 0, 1, 0, 0, 1}), 0.5);
}

TEST(RocAuc, MatchesPairCountingOnRandomInstances) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> level(0, 6);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 40;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) * 0.25;
      y[i] = coin(rng) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_DOUBLE_EQ(roc_auc(s, y), pair_count_auc(s, y)) << "trial " << trial;
  }
}

TEST(RocAuc, OneClassThrows) {
  const std::vector<double> s{0.1, 0.2};
  EXPECT_THROW(roc_auc(s, std::vector<int>{1, 1}), atbilstm::OneClassOnly);
  EXPECT_THROW(roc_auc(s, std::vector<int>{0, 0}), atbilstm::OneClassOnly);
}

TEST(Evaluate, ExcludesZeroReturnDays) {
  const std::vector<double> s{0.5, -0.2, 0.1, 0.3};
  const std::vector<double> r{0.01, -0.02, 0.0, -0.01};
  const auto e = evaluate(s, r);
  EXPECT_EQ(e.days, 3u);
  ASSERT_TRUE(e.accuracy);
  EXPECT_DOUBLE_EQ(*e.accuracy, 2.0 / 3.0);
  ASSERT_TRUE(e.auc);
  EXPECT_DOUBLE_EQ(*e.auc, 1.0);
}

TEST(Evaluate, PerfectOrderingScoresOne) {
  const std::vector<double> s{2.0, -1.0, 3.0, -0.5};
  const std::vector<double> r{0.02, -0.01, 0.03, -0.04};
  const auto e = evaluate(s, r);
  EXPECT_DOUBLE_EQ(*e.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(*e.auc, 1.0);
}

TEST(Evaluate, SingleDirectionHasNoAuc) {
  const std::vector<double> s{0.5, -0.2};
  const std::vector<double> r{0.01, 0.02};
  const auto e = evaluate(s, r);
  EXPECT_FALSE(e.auc);
  EXPECT_DOUBLE_EQ(*e.accuracy, 0.5);
}

TEST(Evaluate, AllFlatReturnsHaveNoAccuracy) {
  const std::vector<double> s{0.5, -0.2};
  const std::vector<double> r{0.0, 0.0};
  const auto e = evaluate(s, r);
  EXPECT_EQ(e.days, 0u);
  EXPECT_FALSE(e.accuracy);
  EXPECT_FALSE(e.auc);
}

TEST(Backtest, AlwaysLong) {
  const std::vector<double> p{1.0, 1.0};
  const std::vector<double> r{0.10, -0.10};
  const auto eq = backtest_equity(p, r, 1000.0);
  ASSERT_EQ(eq.size(), 3u);
  EXPECT_DOUBLE_EQ(eq[0], 1000.0);
  EXPECT_DOUBLE_EQ(eq[1], 1100.0);
  EXPECT_DOUBLE_EQ(eq[2], 990.0);
}

TEST(Backtest, OracleSidestepsTheLoss) {
  const std::vector<double> r{0.10, -0.10};
  const auto eq = backtest_equity(r, r, 1000.0);
  EXPECT_DOUBLE_EQ(eq[1], 1100.0);
  EXPECT_DOUBLE_EQ(eq[2], 1100.0);
}

TEST(Backtest, AlwaysFlatKeepsCapital) {
  const std::vector<double> p{-1.0, 0.0, -3.0};
  const std::vector<double> r{0.10, -0.10, 0.5};
  for (double v : backtest_equity(p, r, 1000.0)) EXPECT_EQ(v, 1000.0);
}

TEST(Backtest, FollowsEquityRecurrence) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 0.02);
  std::vector<double> p(200), r(200);
  for (std::size_t i = 0; i < 200; ++i) {
    p[i] = z(rng);
    r[i] = z(rng);
  }
  const auto eq = backtest_equity(p, r, 250.0);
  ASSERT_EQ(eq.size(), 201u);
  EXPECT_EQ(eq[0], 250.0);
  for (std::size_t t = 0; t < 200; ++t) {
    const double position = p[t] > 0.0 ? 1.0 : 0.0;
    EXPECT_DOUBLE_EQ(eq[t + 1], eq[t] * (1.0 + position * r[t]));
  }
}
