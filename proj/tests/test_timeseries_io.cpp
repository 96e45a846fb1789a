#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "atbilstm/timeseries_io.hpp"

using namespace atbilstm;
using namespace atbilstm::io;

namespace {

Day d(int y, unsigned m, unsigned dd) { return Day::from_ymd(y, m, dd); }

std::vector<Day> days(Day start, int n) {
  std::vector<Day> out;
  for (int i = 0; i < n; ++i) out.push_back(start + i);
  return out;
}

PriceSeries from_samples(const std::vector<double>& prices, const std::vector<bool>& missing) {
  PriceSeries s;
  for (std::size_t i = 0; i < prices.size(); ++i) {
    s.dates.push_back(Day{1000 + static_cast<int>(i)});
    s.prices.push_back(missing[i] ? std::nan("") : prices[i]);
    s.flags.push_back(missing[i] ? FillFlag::Missing : FillFlag::Observed);
  }
  return s;
}

}  // namespace

TEST(ParseDate, AcceptsUsAndIsoForms) {
  EXPECT_EQ(parse_date("9/11/16"), d(2016, 9, 11));
  EXPECT_EQ(parse_date("09/11/2016"), d(2016, 9, 11));
  EXPECT_EQ(parse_date("2016-09-11"), d(2016, 9, 11));
  EXPECT_FALSE(parse_date("2016-02-30"));
  EXPECT_FALSE(parse_date("Date"));
  EXPECT_EQ(d(2016, 9, 11).iso(), "2016-09-11");
}

TEST(ParsePriceCsv, MapsFields) {
  std::istringstream in("9/11/16,1324.6\n");
  const auto p = parse_price_csv(in, Asset::Gold);
  ASSERT_EQ(p.quotes.size(), 1u);
  EXPECT_EQ(p.quotes[0].date, d(2016, 9, 11));
  EXPECT_DOUBLE_EQ(p.quotes[0].price, 1324.6);
  EXPECT_EQ(p.quotes[0].asset, Asset::Gold);
}

TEST(ParsePriceCsv, EmptyFileGivesNoQuotes) {
  std::istringstream in("");
  EXPECT_TRUE(parse_price_csv(in, Asset::Bitcoin).quotes.empty());
}

TEST(ParsePriceCsv, HeaderIsOptionalAndOutputSorted) {
  std::istringstream in("Date,Value\n9/13/16,3\n9/11/16,1\n9/12/16,2\n");
  const auto p = parse_price_csv(in, Asset::Bitcoin);
  ASSERT_EQ(p.quotes.size(), 3u);
  EXPECT_EQ(p.quotes[0].date, d(2016, 9, 11));
  EXPECT_EQ(p.quotes[2].date, d(2016, 9, 13));
}

TEST(ParsePriceCsv, DuplicateDateThrows) {
  std::istringstream in("9/11/16,1\n2016-09-11,2\n");
  EXPECT_THROW(parse_price_csv(in, Asset::Gold), DuplicateDate);
}

TEST(ParsePriceCsv, UnparseablePriceIsReportedNotDropped) {
  std::istringstream in("9/11/16,1\n9/12/16,\n9/13/16,abc\n9/14/16,4\n");
  const auto p = parse_price_csv(in, Asset::Gold);
  EXPECT_EQ(p.quotes.size(), 2u);
  ASSERT_EQ(p.missing.size(), 2u);
  EXPECT_EQ(p.missing[0].line, 2u);
  EXPECT_EQ(p.missing[1].date, d(2016, 9, 13));
}

TEST(ParsePriceCsv, BadDateOrColumnCountIsMalformed) {
  std::istringstream a("9/11/16,1\nnotadate,2\n");
  try {
    parse_price_csv(a, Asset::Gold);
    FAIL();
  } catch (const MalformedRow& e) {
    EXPECT_EQ(e.line, 2u);
  }
  std::istringstream b("9/11/16,1,3\n");
  EXPECT_THROW(parse_price_csv(b, Asset::Gold), MalformedRow);
}

TEST(ParsePriceCsv, MissingFileThrows) {
  EXPECT_THROW(parse_price_csv(std::filesystem::path("/nonexistent/x.csv"), Asset::Gold), FileNotFound);
}

TEST(AlignCalendar, ForwardFillsAbsentDates) {
  const Day d1{10};
  std::vector<RawQuote> q{{d1, 100.0, Asset::Gold}};
  const auto cal = days(d1, 2);
  const auto s = align_calendar(q, cal);
  EXPECT_EQ(s.prices, (std::vector<double>{100, 100}));
  EXPECT_EQ(s.flags, (std::vector<FillFlag>{FillFlag::Observed, FillFlag::ForwardFilled}));
}

TEST(AlignCalendar, SingleGap) {
  const Day d1{10};
  std::vector<RawQuote> q{{d1, 100.0, Asset::Gold}, {d1 + 2, 110.0, Asset::Gold}};
  const auto s = align_calendar(q, days(d1, 3));
  EXPECT_EQ(s.prices, (std::vector<double>{100, 100, 110}));
}

TEST(AlignCalendar, UnobservedFirstDateIsNoAnchor) {
  const Day d1{10};
  std::vector<RawQuote> q{{d1 + 1, 100.0, Asset::Gold}};
  EXPECT_THROW(align_calendar(q, days(d1, 2)), NoAnchor);
}

TEST(AlignCalendar, OutputLengthEqualsCalendarLength) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 50);
    const auto cal = days(Day{0}, n);
    std::vector<RawQuote> q{{Day{0}, 1.0, Asset::Gold}};
    for (int i = 1; i < n; ++i)
      if (rng() % 3) q.push_back({Day{i}, 1.0 + i, Asset::Gold});
    EXPECT_EQ(align_calendar(q, cal).size(), cal.size());
  }
}

TEST(MasterCalendar, IsUnionOfBothAssets) {
  std::istringstream g("2016-09-12,1\n2016-09-13,1\n");
  std::istringstream b("2016-09-11,1\n2016-09-12,1\n2016-09-14,\n");
  const std::vector<ParsedPrices> in{parse_price_csv(g, Asset::Gold), parse_price_csv(b, Asset::Bitcoin)};
  const auto cal = master_calendar(in);
  EXPECT_EQ(cal, days(d(2016, 9, 11), 4));
}

TEST(MasterCalendar, CommonCalendarStartsWhenEveryAssetHasAQuote) {
  std::istringstream g("2016-09-12,1\n2016-09-13,1\n");
  std::istringstream b("2016-09-11,1\n2016-09-12,1\n2016-09-14,\n");
  const std::vector<ParsedPrices> in{parse_price_csv(g, Asset::Gold), parse_price_csv(b, Asset::Bitcoin)};
  const auto cal = common_calendar(in);
  EXPECT_EQ(cal, days(d(2016, 9, 12), 3));
  for (const auto& p : in) EXPECT_EQ(align_calendar(p, cal).flags.front(), FillFlag::Observed);

  std::istringstream empty("2016-09-12,\n");
  const std::vector<ParsedPrices> none{parse_price_csv(empty, Asset::Gold)};
  EXPECT_THROW(common_calendar(none), atbilstm::NoAnchor);
}

TEST(Lagrange, QuadraticThroughThreePoints) {
  const double xs[] = {0, 1, 2}, ys[] = {1, 2, 5};
  EXPECT_EQ(lagrange_interpolate(xs, ys, 1.5), 3.25);
}

TEST(Lagrange, ConstantWithTwoPoints) {
  auto s = from_samples({5, 0, 5}, {false, true, false});
  s = lagrange_fill(s, 2);
  EXPECT_DOUBLE_EQ(s.prices[1], 5.0);
  EXPECT_EQ(s.flags[1], FillFlag::Interpolated);
}

TEST(Lagrange, InterpolantPassesThroughData) {
  const double xs[] = {0, 1, 3, 4}, ys[] = {2, -1, 7, 0.5};
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(lagrange_interpolate(xs, ys, xs[j]), ys[j], 1e-12);

  auto s = from_samples({1, 2, 3, 4, 5, 6}, {false, false, true, false, false, false});
  const auto filled = lagrange_fill(s, 4);
  for (std::size_t i : {0u, 1u, 3u, 4u, 5u}) EXPECT_EQ(filled.prices[i], s.prices[i]);
}

TEST(Lagrange, InsufficientNeighbors) {
  auto s = from_samples({1, 0, 3}, {false, true, false});
  EXPECT_THROW(lagrange_fill(s, 3), InsufficientNeighbors);
}

TEST(Lagrange, PolynomialExactnessProperty) {
  // Held-out samples of any polynomial of degree < window come back exact.
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t window = 2 + rng() % 4;
    std::vector<double> c(window);
    for (auto& v : c) v = coef(rng);
    auto poly = [&](double x) {
      double y = 0.0;
      for (std::size_t k = c.size(); k-- > 0;) y = y * x + c[k];
      return y + 50.0;
    };
    const std::size_t n = 12;
    std::vector<bool> missing(n, false);
    std::vector<double> samples(n);
    for (std::size_t i = 0; i < n; ++i) samples[i] = poly(static_cast<double>(i));
    for (std::size_t i = 1; i + 1 < n; ++i) missing[i] = (rng() % 4 == 0);
    const auto s = from_samples(samples, missing);
    const auto filled = lagrange_fill(s, window);
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_NEAR(filled.prices[i], samples[i], 1e-9 * std::max(1.0, std::abs(samples[i])));
  }
}

TEST(Lagrange, Idempotent) {
  auto s = from_samples({10, 11, 0, 13, 12, 0, 15, 16}, {false, false, true, false, false, true, false, false});
  const auto once = lagrange_fill(s);
  const auto twice = lagrange_fill(once);
  EXPECT_EQ(once.prices, twice.prices);
  EXPECT_EQ(once.flags, twice.flags);
  EXPECT_TRUE(once.complete());
}

TEST(Lagrange, InteriorGapsStayPositive) {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> step(0.0, 0.02);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p{100.0};
    std::vector<bool> missing{false};
    for (int i = 1; i < 60; ++i) {
      p.push_back(p.back() * step(rng));
      missing.push_back(i > 2 && i < 57 && rng() % 5 == 0);
    }
    const auto filled = lagrange_fill(from_samples(p, missing));
    for (double v : filled.prices) {
      EXPECT_FALSE(std::isnan(v));
      EXPECT_GT(v, 0.0);
    }
  }
}

TEST(SeriesCsv, RoundTrip) {
  auto s = lagrange_fill(from_samples({1.5, 0, 2.25, 3}, {false, true, false, false}), 2);
  s.flags[3] = FillFlag::ForwardFilled;
  std::stringstream buf;
  write_series_csv(buf, s);
  const auto back = read_series_csv(buf);
  EXPECT_EQ(back.dates, s.dates);
  EXPECT_EQ(back.prices, s.prices);
  EXPECT_EQ(back.flags, s.flags);
}
