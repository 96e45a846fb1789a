#pragma once

#include <chrono>
#include <charconv>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace atbilstm {

/// Calendar date stored as a day count since 1970-01-01.
struct Day {
  int days = 0;

  friend constexpr auto operator<=>(Day, Day) = default;
  friend constexpr int operator-(Day a, Day b) { return a.days - b.days; }
  constexpr Day operator+(int n) const { return Day{days + n}; }

  static Day from_ymd(int y, unsigned m, unsigned d) {
    using namespace std::chrono;
    return Day{static_cast<int>(sys_days{year{y} / month{m} / day{d}}.time_since_epoch().count())};
  }

  std::chrono::year_month_day ymd() const {
    return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days}}};
  }

  bool weekend() const {
    const std::chrono::weekday w{std::chrono::sys_days{std::chrono::days{days}}};
    return w == std::chrono::Saturday || w == std::chrono::Sunday;
  }

  std::string iso() const {
    const auto d = ymd();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
  }
};

namespace detail {

inline std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  if (s.empty()) return std::nullopt;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<Day> make_day(int y, int m, int d) {
  if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Day::from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

}  // namespace detail

/// Accepts ISO-8601 (YYYY-MM-DD) and US-style M/D/YY or M/D/YYYY.
/// Two-digit years map to 20YY.
inline std::optional<Day> parse_date(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);

  if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
    auto y = detail::parse_int(s.substr(0, 4));
    auto m = detail::parse_int(s.substr(5, 2));
    auto d = detail::parse_int(s.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    return detail::make_day(*y, *m, *d);
  }

  const auto a = s.find('/');
  if (a == std::string_view::npos) return std::nullopt;
  const auto b = s.find('/', a + 1);
  if (b == std::string_view::npos) return std::nullopt;
  auto m = detail::parse_int(s.substr(0, a));
  auto d = detail::parse_int(s.substr(a + 1, b - a - 1));
  const auto ys = s.substr(b + 1);
  auto y = detail::parse_int(ys);
  if (!m || !d || !y) return std::nullopt;
  if (ys.size() == 2) {
    *y += 2000;
  } else if (ys.size() != 4) {
    return std::nullopt;
  }
  return detail::make_day(*y, *m, *d);
}

}  // namespace atbilstm
