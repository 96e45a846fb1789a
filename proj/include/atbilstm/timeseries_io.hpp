#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atbilstm/date.hpp"
#include "atbilstm/error.hpp"
#include "atbilstm/text.hpp"

namespace atbilstm::io {

enum class Asset { Gold, Bitcoin };

struct RawQuote {
  Day date;
  double price = 0.0;
  Asset asset = Asset::Gold;
};

/// A dated row whose price field was empty or not a positive number. Such
/// rows mark trading days with a missing value and are filled by
/// interpolation instead of forward-fill.
struct MissingRow {
  std::size_t line = 0;
  Day date;
};

struct ParsedPrices {
  std::vector<RawQuote> quotes;
  std::vector<MissingRow> missing;
};

enum class FillFlag { Observed, ForwardFilled, Interpolated, Missing };

inline std::string_view to_string(FillFlag f) {
  switch (f) {
    case FillFlag::Observed: return "observed";
    case FillFlag::ForwardFilled: return "forward_filled";
    case FillFlag::Interpolated: return "interpolated";
    case FillFlag::Missing: return "missing";
  }
  return "?";
}

inline std::optional<FillFlag> parse_fill_flag(std::string_view s) {
  for (auto f : {FillFlag::Observed, FillFlag::ForwardFilled, FillFlag::Interpolated, FillFlag::Missing})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

/// Date-indexed prices for one asset. Entries flagged Missing carry NaN and
/// exist only between align_calendar and lagrange_fill.
struct PriceSeries {
  std::vector<Day> dates;
  std::vector<double> prices;
  std::vector<FillFlag> flags;

  std::size_t size() const { return dates.size(); }
  bool complete() const {
    return std::none_of(flags.begin(), flags.end(), [](FillFlag f) { return f == FillFlag::Missing; });
  }
};

/// Parses a two-column date,price file. A first line whose date does not
/// parse is taken as a header.
inline ParsedPrices parse_price_csv(std::istream& in, Asset asset) {
  ParsedPrices out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto row = text::trim(line);
    if (lineno == 1 && row.size() >= 3 && static_cast<unsigned char>(row[0]) == 0xEF) row.remove_prefix(3);
    if (row.empty()) continue;
    const auto cols = text::split(row);
    if (cols.size() != 2) throw MalformedRow(lineno, "expected 2 columns, found " + std::to_string(cols.size()));
    const auto date = parse_date(cols[0]);
    if (!date) {
      if (lineno == 1) continue;
      throw MalformedRow(lineno, "unrecognised date '" + std::string(cols[0]) + "'");
    }
    const auto price = text::parse_double(cols[1]);
    if (!price || !std::isfinite(*price) || *price <= 0.0) {
      out.missing.push_back({lineno, *date});
      continue;
    }
    out.quotes.push_back({*date, *price, asset});
  }

  std::vector<Day> seen;
  seen.reserve(out.quotes.size() + out.missing.size());
  for (const auto& q : out.quotes) seen.push_back(q.date);
  for (const auto& m : out.missing) seen.push_back(m.date);
  std::sort(seen.begin(), seen.end());
  if (auto dup = std::adjacent_find(seen.begin(), seen.end()); dup != seen.end()) throw DuplicateDate(dup->iso());

  std::sort(out.quotes.begin(), out.quotes.end(), [](const RawQuote& a, const RawQuote& b) { return a.date < b.date; });
  std::sort(out.missing.begin(), out.missing.end(),
            [](const MissingRow& a, const MissingRow& b) { return a.date < b.date; });
  return out;
}

inline ParsedPrices parse_price_csv(const std::filesystem::path& path, Asset asset) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path.string());
  return parse_price_csv(in, asset);
}

/// Sorted union of the dates observed (or marked missing) in any input.
inline std::vector<Day> master_calendar(std::span<const ParsedPrices> inputs) {
  std::vector<Day> cal;
  for (const auto& p : inputs) {
    for (const auto& q : p.quotes) cal.push_back(q.date);
    for (const auto& m : p.missing) cal.push_back(m.date);
  }
  std::sort(cal.begin(), cal.end());
  cal.erase(std::unique(cal.begin(), cal.end()), cal.end());
  return cal;
}

/// Drops leading calendar days before every input has its first quote, so
/// each aligned series starts on an observed price. Throws NoAnchor when
/// some input has no quotes at all.
inline std::vector<Day> common_calendar(std::span<const ParsedPrices> inputs) {
  auto cal = master_calendar(inputs);
  Day start = cal.empty() ? Day{0} : cal.front();
  for (const auto& p : inputs) {
    if (p.quotes.empty()) throw NoAnchor();
    start = std::max(start, p.quotes.front().date);
  }
  cal.erase(cal.begin(), std::lower_bound(cal.begin(), cal.end(), start));
  return cal;
}

/// Places quotes on the calendar. Calendar days without a quote take the
/// previous price (ForwardFilled) unless listed in `gaps`, which are left as
/// Missing for lagrange_fill.
inline PriceSeries align_calendar(std::span<const RawQuote> quotes, std::span<const Day> calendar,
                                  std::span<const Day> gaps = {}) {
  PriceSeries s;
  if (calendar.empty()) return s;
  s.dates.assign(calendar.begin(), calendar.end());
  s.prices.resize(calendar.size());
  s.flags.resize(calendar.size());

  std::vector<Day> gap_days(gaps.begin(), gaps.end());
  std::sort(gap_days.begin(), gap_days.end());

  std::size_t q = 0;
  double last = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < calendar.size(); ++i) {
    const Day d = calendar[i];
    while (q < quotes.size() && quotes[q].date < d) ++q;
    if (q < quotes.size() && quotes[q].date == d) {
      s.prices[i] = last = quotes[q].price;
      s.flags[i] = FillFlag::Observed;
    } else if (i == 0) {
      throw NoAnchor();
    } else if (std::binary_search(gap_days.begin(), gap_days.end(), d)) {
      s.prices[i] = std::numeric_limits<double>::quiet_NaN();
      s.flags[i] = FillFlag::Missing;
    } else {
      s.prices[i] = last;
      s.flags[i] = FillFlag::ForwardFilled;
    }
  }
  return s;
}

inline PriceSeries align_calendar(const ParsedPrices& parsed, std::span<const Day> calendar) {
  std::vector<Day> gaps;
  for (const auto& m : parsed.missing) gaps.push_back(m.date);
  return align_calendar(parsed.quotes, calendar, gaps);
}

/// Lagrange polynomial through (xs[j], ys[j]) evaluated at x.
inline double lagrange_interpolate(std::span<const double> xs, std::span<const double> ys, double x) {
  double sum = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    double weight = 1.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      if (k == j) continue;
      weight *= (x - xs[k]) / (xs[j] - xs[k]);
    }
    sum += weight * ys[j];
  }
  return sum;
}

/// Replaces each Missing entry by the Lagrange polynomial through the
/// `window` observed points nearest to it in time (ties go to the earlier
/// point). Other entries are untouched.
inline PriceSeries lagrange_fill(PriceSeries series, std::size_t window = 4) {
  if (window == 0) throw InsufficientNeighbors("(window must be positive)");
  std::vector<std::size_t> observed;
  for (std::size_t i = 0; i < series.size(); ++i)
    if (series.flags[i] == FillFlag::Observed) observed.push_back(i);

  const Day origin = series.size() ? series.dates.front() : Day{};
  std::vector<double> xs(window), ys(window);
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series.flags[i] != FillFlag::Missing) continue;
    if (observed.size() < window) throw InsufficientNeighbors(series.dates[i].iso());

    // Two-pointer walk outward from the insertion point.
    auto right = static_cast<std::size_t>(std::lower_bound(observed.begin(), observed.end(), i) - observed.begin());
    std::size_t left = right;  // candidates are observed[left-1] and observed[right]
    const int xi = series.dates[i] - origin;
    for (std::size_t n = 0; n < window; ++n) {
      bool take_left;
      if (left == 0) {
        take_left = false;
      } else if (right == observed.size()) {
        take_left = true;
      } else {
        const int dl = xi - (series.dates[observed[left - 1]] - origin);
        const int dr = (series.dates[observed[right]] - origin) - xi;
        take_left = dl <= dr;
      }
      const std::size_t idx = take_left ? observed[--left] : observed[right++];
      xs[n] = series.dates[idx] - origin;
      ys[n] = series.prices[idx];
    }
    series.prices[i] = lagrange_interpolate(xs, ys, xi);
    series.flags[i] = FillFlag::Interpolated;
  }
  return series;
}

inline void write_series_csv(std::ostream& out, const PriceSeries& s) {
  out << "date,price,fill_flag\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out << s.dates[i].iso() << ',' << text::format_double(s.prices[i]) << ',' << to_string(s.flags[i]) << '\n';
}

inline PriceSeries read_series_csv(std::istream& in) {
  PriceSeries s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto row = text::trim(line);
    if (row.empty() || lineno == 1) continue;
    const auto cols = text::split(row);
    if (cols.size() != 3) throw MalformedRow(lineno, "expected date,price,fill_flag");
    const auto d = parse_date(cols[0]);
    const auto p = text::parse_double(cols[1]);
    const auto f = parse_fill_flag(text::trim(cols[2]));
    if (!d || !p || !f) throw MalformedRow(lineno, "unparseable cleaned-series row");
    if (!s.dates.empty() && !(s.dates.back() < *d)) throw DuplicateDate(d->iso());
    s.dates.push_back(*d);
    s.prices.push_back(*p);
    s.flags.push_back(*f);
  }
  return s;
}

inline PriceSeries read_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path.string());
  return read_series_csv(in);
}

}  // namespace atbilstm::io
