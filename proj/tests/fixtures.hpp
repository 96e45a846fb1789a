#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "atbilstm/garch.hpp"
#include "atbilstm/indicators.hpp"
#include "atbilstm/timeseries_io.hpp"

namespace fixtures {

/// Geometric random walk starting at `start`.
inline std::vector<double> random_prices(std::size_t n, std::uint64_t seed, double start = 100.0,
                                         double vol = 0.02) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, vol);
  std::vector<double> p{start};
  while (p.size() < n) p.push_back(p.back() * std::exp(z(rng)));
  return p;
}

inline atbilstm::io::PriceSeries observed_series(const std::vector<double>& prices, int first_day = 17055) {
  atbilstm::io::PriceSeries s;
  for (std::size_t i = 0; i < prices.size(); ++i) {
    s.dates.push_back(atbilstm::Day{first_day + static_cast<int>(i)});
    s.prices.push_back(prices[i]);
    s.flags.push_back(atbilstm::io::FillFlag::Observed);
  }
  return s;
}

/// GarchFit with arbitrary but valid attribute series, for tests that only
/// need the plumbing.
inline atbilstm::garch::GarchFit stub_fit(const atbilstm::io::PriceSeries& s) {
  atbilstm::garch::GarchFit f;
  f.phi = 1.0;
  f.alpha0 = 0.1;
  f.alpha1 = 0.1;
  f.beta1 = 0.8;
  std::tie(f.mu, f.sigma2) = atbilstm::garch::garch_attributes(s.prices, f.params());
  f.dates = s.dates;
  return f;
}

/// Prices whose (P_t - P_{t-1}) / P_t returns follow a sign chain that
/// repeats the previous sign with probability `persist`.
inline std::vector<double> planted_sign_prices(std::size_t n, double persist, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::lognormal_distribution<double> mag(std::log(0.01), 0.5);
  std::vector<double> p{100.0};
  double sign = 1.0;
  while (p.size() < n) {
    if (u(rng) >= persist) sign = -sign;
    const double r = sign * std::min(mag(rng), 0.2);
    p.push_back(p.back() / (1.0 - r));
  }
  return p;
}

/// Feature matrix of Gaussian noise whose targets are the next row's
/// return column, as build_feature_matrix would produce.
inline atbilstm::ind::FeatureMatrix random_feature_matrix(std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  atbilstm::ind::FeatureMatrix fm;
  for (std::size_t r = 0; r < rows; ++r) fm.dates.push_back(atbilstm::Day{17055 + static_cast<int>(r)});
  for (auto& col : fm.columns)
    for (std::size_t r = 0; r < rows; ++r) col.push_back(z(rng));
  for (auto& v : fm.columns[atbilstm::ind::kReturnColumn]) v *= 0.01;
  for (std::size_t r = 0; r + 1 < rows; ++r) fm.target.push_back(fm.columns[atbilstm::ind::kReturnColumn][r + 1]);
  fm.target.push_back(0.01 * z(rng));
  return fm;
}

}  // namespace fixtures
