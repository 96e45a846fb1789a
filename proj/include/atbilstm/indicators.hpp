#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atbilstm/error.hpp"
#include "atbilstm/garch.hpp"
#include "atbilstm/text.hpp"
#include "atbilstm/timeseries_io.hpp"

// Every indicator returns a vector the length of its input. Leading
// entries without a full trailing window are NaN ("invalid").
namespace atbilstm::ind {

inline constexpr double kInvalid = std::numeric_limits<double>::quiet_NaN();

inline bool valid(double v) { return !std::isnan(v); }

enum class ReturnForm {
  /// (P_t - P_{t-1}) / P_t
  OverCurrent,
  /// (P_t - P_{t-1}) / P_{t-1}
  OverPrevious,
};

struct IndicatorConfig {
  std::array<std::size_t, 2> var_windows{10, 20};
  std::array<std::size_t, 2> ma_windows{10, 30};
  std::size_t boll_window = 20;
  std::size_t psy_window = 12;
  std::size_t rsi_window = 14;
  ReturnForm return_form = ReturnForm::OverCurrent;

  void validate() const {
    for (auto w : {var_windows[0], var_windows[1], ma_windows[0], ma_windows[1], boll_window, psy_window, rsi_window})
      if (w < 2) throw Error("indicator windows must be at least 2");
  }

  /// Number of leading rows that are invalid in at least one column.
  std::size_t warmup() const {
    return std::max({var_windows[0] - 1, var_windows[1] - 1, ma_windows[0] - 1, ma_windows[1] - 1, boll_window - 1,
                     psy_window, rsi_window, std::size_t{1}});
  }
};

inline std::vector<double> returns(std::span<const double> prices, ReturnForm form = ReturnForm::OverCurrent) {
  std::vector<double> r(prices.size(), kInvalid);
  for (std::size_t t = 0; t < prices.size(); ++t)
    if (prices[t] == 0.0) throw ZeroPrice(t);
  for (std::size_t t = 1; t < prices.size(); ++t) {
    const double denom = form == ReturnForm::OverCurrent ? prices[t] : prices[t - 1];
    r[t] = (prices[t] - prices[t - 1]) / denom;
  }
  return r;
}

namespace detail {

inline void check_window(std::size_t window, std::size_t length) {
  if (window == 0 || window > length) throw WindowTooLarge(window, length);
}

inline double mean_of(std::span<const double> w) {
  double s = 0.0;
  for (double v : w) s += v;
  return s / static_cast<double>(w.size());
}

inline double pop_variance_of(std::span<const double> w) {
  const double m = mean_of(w);
  double s = 0.0;
  for (double v : w) s += (v - m) * (v - m);
  return s / static_cast<double>(w.size());
}

/// Applies f to each full trailing window that contains no NaN.
template <typename F>
std::vector<double> rolling(std::span<const double> x, std::size_t window, F&& f) {
  check_window(window, x.size());
  std::vector<double> out(x.size(), kInvalid);
  for (std::size_t t = window - 1; t < x.size(); ++t) {
    const auto w = x.subspan(t + 1 - window, window);
    if (std::any_of(w.begin(), w.end(), [](double v) { return std::isnan(v); })) continue;
    out[t] = f(w);
  }
  return out;
}

}  // namespace detail

inline std::vector<double> rolling_variance(std::span<const double> prices, std::size_t window) {
  return detail::rolling(prices, window, detail::pop_variance_of);
}

inline std::vector<double> moving_average(std::span<const double> prices, std::size_t window) {
  return detail::rolling(prices, window, detail::mean_of);
}

struct BollingerBands {
  std::vector<double> high, mid, low;
};

/// mid is the trailing mean over the window ending at t; bands sit two
/// population standard deviations either side.
inline BollingerBands bollinger(std::span<const double> prices, std::size_t window) {
  BollingerBands b;
  b.mid = moving_average(prices, window);
  const auto var = rolling_variance(prices, window);
  b.high.assign(prices.size(), kInvalid);
  b.low.assign(prices.size(), kInvalid);
  for (std::size_t t = 0; t < prices.size(); ++t) {
    if (!valid(b.mid[t])) continue;
    const double sd = std::sqrt(var[t]);
    b.high[t] = b.mid[t] + 2.0 * sd;
    b.low[t] = b.mid[t] - 2.0 * sd;
  }
  return b;
}

/// Fraction of strictly positive returns in the trailing window.
inline std::vector<double> psych_index(std::span<const double> rets, std::size_t window) {
  return detail::rolling(rets, window, [](std::span<const double> w) {
    const auto up = std::count_if(w.begin(), w.end(), [](double r) { return r > 0.0; });
    return static_cast<double>(up) / static_cast<double>(w.size());
  });
}

/// Simple-average RSI over the last `window` price changes. Unchanged days
/// are neither gains nor losses. No losses gives 100, no gains gives 0, and
/// a window with neither gives 50.
inline std::vector<double> rsi(std::span<const double> prices, std::size_t window) {
  detail::check_window(window + 1, prices.size());
  std::vector<double> out(prices.size(), kInvalid);
  for (std::size_t t = window; t < prices.size(); ++t) {
    double gain = 0.0, loss = 0.0;
    for (std::size_t i = t + 1 - window; i <= t; ++i) {
      const double d = prices[i] - prices[i - 1];
      if (d > 0.0) gain += d;
      else if (d < 0.0) loss -= d;
    }
    if (loss == 0.0) out[t] = gain == 0.0 ? 50.0 : 100.0;
    else if (gain == 0.0) out[t] = 0.0;
    else out[t] = 100.0 - 100.0 / (1.0 + gain / loss);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature matrix
// ---------------------------------------------------------------------------

/// Column order of FeatureMatrix::columns and of the feature CSV.
inline constexpr std::array<std::string_view, 12> kFeatureNames{
    "return", "var10",    "var20", "ma10", "ma30",     "boll_high",
    "boll_mid", "boll_low", "psy", "rsi",  "garch_mu", "garch_sigma2"};
inline constexpr std::size_t kFeatureCount = kFeatureNames.size();
inline constexpr std::size_t kReturnColumn = 0;

/// Valid rows only. target[i] is the return of the following row's date.
struct FeatureMatrix {
  std::vector<Day> dates;
  std::array<std::vector<double>, kFeatureCount> columns;
  std::vector<double> target;

  std::size_t rows() const { return dates.size(); }
  double at(std::size_t row, std::size_t col) const { return columns[col][row]; }
};

/// Assembles every indicator column plus the GARCH attributes. Rows with any
/// invalid entry, and the final row (no next-day return), are dropped.
inline FeatureMatrix build_feature_matrix(const io::PriceSeries& series, const garch::GarchFit& fit,
                                          const IndicatorConfig& cfg = {}) {
  cfg.validate();
  const std::size_t n = series.size();
  if (fit.mu.size() != n || fit.sigma2.size() != n)
    throw AlignmentMismatch("GARCH series length " + std::to_string(fit.mu.size()) + " vs price series length " +
                            std::to_string(n));
  if (!fit.dates.empty() && fit.dates != series.dates)
    throw AlignmentMismatch("GARCH series dates differ from price series dates");
  if (!series.complete()) throw Error("build_feature_matrix: series still has missing entries");

  FeatureMatrix fm;
  if (n <= cfg.warmup() + 1) return fm;

  const std::span<const double> p = series.prices;
  const auto ret = returns(p, cfg.return_form);
  auto boll = bollinger(p, cfg.boll_window);
  std::array<std::vector<double>, kFeatureCount> cols{
      ret,
      rolling_variance(p, cfg.var_windows[0]),
      rolling_variance(p, cfg.var_windows[1]),
      moving_average(p, cfg.ma_windows[0]),
      moving_average(p, cfg.ma_windows[1]),
      std::move(boll.high),
      std::move(boll.mid),
      std::move(boll.low),
      psych_index(ret, cfg.psy_window),
      rsi(p, cfg.rsi_window),
      fit.mu,
      fit.sigma2};

  for (std::size_t t = 0; t + 1 < n; ++t) {
    if (!std::all_of(cols.begin(), cols.end(), [t](const auto& c) { return valid(c[t]); })) continue;
    fm.dates.push_back(series.dates[t]);
    for (std::size_t c = 0; c < kFeatureCount; ++c) fm.columns[c].push_back(cols[c][t]);
    fm.target.push_back(ret[t + 1]);
  }
  return fm;
}

inline void write_feature_csv(std::ostream& out, const FeatureMatrix& fm) {
  out << "date";
  for (auto name : kFeatureNames) out << ',' << name;
  out << ",target\n";
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    out << fm.dates[r].iso();
    for (std::size_t c = 0; c < kFeatureCount; ++c) out << ',' << text::format_double(fm.columns[c][r]);
    out << ',' << text::format_double(fm.target[r]) << '\n';
  }
}

inline FeatureMatrix read_feature_csv(std::istream& in) {
  FeatureMatrix fm;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto row = text::trim(line);
    if (row.empty()) continue;
    const auto cols = text::split(row);
    if (cols.size() != kFeatureCount + 2) throw MalformedRow(lineno, "feature row has wrong column count");
    if (lineno == 1) {
      for (std::size_t c = 0; c < kFeatureCount; ++c)
        if (text::trim(cols[c + 1]) != kFeatureNames[c]) throw MalformedRow(1, "unexpected feature header");
      continue;
    }
    const auto d = parse_date(cols[0]);
    if (!d) throw MalformedRow(lineno, "bad date");
    fm.dates.push_back(*d);
    for (std::size_t c = 0; c <= kFeatureCount; ++c) {
      const auto v = text::parse_double(cols[c + 1]);
      if (!v) throw MalformedRow(lineno, "bad number");
      (c < kFeatureCount ? fm.columns[c] : fm.target).push_back(*v);
    }
  }
  return fm;
}

inline FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path.string());
  return read_feature_csv(in);
}

}  // namespace atbilstm::ind
