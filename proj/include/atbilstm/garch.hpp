#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "atbilstm/date.hpp"
#include "atbilstm/error.hpp"
#include "atbilstm/text.hpp"

namespace atbilstm::garch {

// ---------------------------------------------------------------------------
// Augmented Dickey-Fuller test
// ---------------------------------------------------------------------------

enum class AdfVariant { None, Trend };

/// Critical values for the unit-root statistic at 1%, 5% and 10%.
inline constexpr std::array<double, 3> kTau1Critical{-2.58, -1.95, -1.62};
inline constexpr std::array<double, 3> kTau3Critical{-3.96, -3.41, -3.12};
/// Joint-hypothesis F critical values (trend variant only, reported not used).
inline constexpr std::array<double, 3> kPhi2Critical{6.09, 4.68, 4.03};
inline constexpr std::array<double, 3> kPhi3Critical{8.27, 6.25, 5.34};

struct AdfResult {
  AdfVariant variant = AdfVariant::None;
  double statistic = 0.0;
  std::optional<double> phi2;
  std::optional<double> phi3;
  std::array<double, 3> critical_values{};
  bool reject_at_1pct = false;
};

namespace detail {

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  double rss = 0.0;
};

inline OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  OlsFit f;
  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  f.beta = ldlt.solve(x.transpose() * y);
  const Eigen::VectorXd resid = y - x * f.beta;
  f.rss = resid.squaredNorm();
  const auto dof = static_cast<double>(x.rows() - x.cols());
  const double s2 = f.rss / dof;
  const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(x.cols(), x.cols())) * s2;
  f.se = cov.diagonal().cwiseSqrt();
  return f;
}

}  // namespace detail

/// Dickey-Fuller regression of the first difference on the lagged level,
/// `lags` lagged differences and, for the Trend variant, a constant and a
/// linear time trend. The statistic is the t-ratio of the lagged level.
inline AdfResult adf_test(std::span<const double> series, AdfVariant variant = AdfVariant::None, std::size_t lags = 1) {
  const std::size_t n = series.size();
  if (n <= lags + 10) throw SeriesTooShort("ADF needs more than lags + 10 observations");

  const std::size_t rows = n - 1 - lags;
  const std::size_t det = variant == AdfVariant::Trend ? 2 : 0;
  Eigen::MatrixXd x(rows, det + 1 + lags);
  Eigen::VectorXd y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t t = r + lags + 1;
    y(r) = series[t] - series[t - 1];
    std::size_t c = 0;
    if (det) {
      x(r, c++) = 1.0;
      x(r, c++) = static_cast<double>(t);
    }
    x(r, c++) = series[t - 1];
    for (std::size_t l = 1; l <= lags; ++l) x(r, c++) = series[t - l] - series[t - l - 1];
  }

  const auto full = detail::ols(x, y);
  AdfResult res;
  res.variant = variant;
  res.statistic = full.beta(det) / full.se(det);
  res.critical_values = variant == AdfVariant::Trend ? kTau3Critical : kTau1Critical;
  res.reject_at_1pct = res.statistic < res.critical_values[0];

  if (variant == AdfVariant::Trend) {
    const double dof = static_cast<double>(rows - x.cols());
    const double s2 = full.rss / dof;
    // phi2: constant, trend and level all zero. phi3: trend and level zero.
    double rss_lags_only = y.squaredNorm();
    if (lags) rss_lags_only = detail::ols(x.rightCols(lags), y).rss;
    Eigen::MatrixXd xc(rows, 1 + lags);
    xc.col(0) = x.col(0);
    if (lags) xc.rightCols(lags) = x.rightCols(lags);
    const double rss_const = detail::ols(xc, y).rss;
    res.phi2 = (rss_lags_only - full.rss) / 3.0 / s2;
    res.phi3 = (rss_const - full.rss) / 2.0 / s2;
  }
  return res;
}

// ---------------------------------------------------------------------------
// GARCH(1,1)
// ---------------------------------------------------------------------------

struct GarchParams {
  double phi = 0.0;
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double beta1 = 0.0;
};

inline bool feasible(const GarchParams& p) {
  return p.alpha0 > 0.0 && p.alpha1 >= 0.0 && p.beta1 >= 0.0 && p.alpha1 + p.beta1 < 1.0;
}

/// Mean equation y_t = phi * y_{t-1} + mu_t with mu_t ~ N(0, sigma2_t).
/// Index 0 of `mu` and `sigma2` has no lagged value and holds NaN.
struct GarchFit {
  double phi = 0.0;
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double beta1 = 0.0;
  std::vector<double> mu;
  std::vector<double> sigma2;
  double loglik = 0.0;
  std::vector<Day> dates;  // empty when fitted from an undated vector

  GarchParams params() const { return {phi, alpha0, alpha1, beta1}; }
};

/// Residuals of the mean equation; element 0 is NaN.
inline std::vector<double> residuals(std::span<const double> y, double phi) {
  std::vector<double> mu(y.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = 1; t < y.size(); ++t) mu[t] = y[t] - y[t - 1] * phi;
  return mu;
}

/// Population variance of mu[1..].
inline double residual_variance(std::span<const double> mu) {
  if (mu.size() < 2) return 0.0;
  double mean = 0.0;
  for (std::size_t t = 1; t < mu.size(); ++t) mean += mu[t];
  mean /= static_cast<double>(mu.size() - 1);
  double ss = 0.0;
  for (std::size_t t = 1; t < mu.size(); ++t) ss += (mu[t] - mean) * (mu[t] - mean);
  return ss / static_cast<double>(mu.size() - 1);
}

/// Forward variance recursion from sigma2[1] = initial.
inline std::vector<double> variance_recursion(std::span<const double> mu, double alpha0, double alpha1, double beta1,
                                              double initial) {
  std::vector<double> s2(mu.size(), std::numeric_limits<double>::quiet_NaN());
  if (mu.size() < 2) return s2;
  s2[1] = initial;
  for (std::size_t t = 2; t < mu.size(); ++t) s2[t] = alpha0 + alpha1 * mu[t - 1] * mu[t - 1] + beta1 * s2[t - 1];
  return s2;
}

/// Gaussian conditional log-likelihood of the series under `p`.
inline double log_likelihood(std::span<const double> y, const GarchParams& p) {
  const auto mu = residuals(y, p.phi);
  const auto s2 = variance_recursion(mu, p.alpha0, p.alpha1, p.beta1, residual_variance(mu));
  double ll = 0.0;
  for (std::size_t t = 1; t < y.size(); ++t) {
    if (!(s2[t] > 0.0)) return -std::numeric_limits<double>::infinity();
    ll += std::log(2.0 * std::numbers::pi) + std::log(s2[t]) + mu[t] * mu[t] / s2[t];
  }
  return -0.5 * ll;
}

/// mu_t and sigma2_t for given parameters, sigma2 seeded with the sample
/// variance of the residuals.
inline std::pair<std::vector<double>, std::vector<double>> garch_attributes(std::span<const double> y,
                                                                            const GarchParams& p) {
  auto mu = residuals(y, p.phi);
  auto s2 = variance_recursion(mu, p.alpha0, p.alpha1, p.beta1, residual_variance(mu));
  return {std::move(mu), std::move(s2)};
}

/// Attributes over all of `y` with the recursion seeded from the residual
/// variance of the first `prefix` observations only, so the value at t
/// depends on nothing after t once t >= prefix.
inline std::pair<std::vector<double>, std::vector<double>> garch_attributes(std::span<const double> y,
                                                                            const GarchParams& p, std::size_t prefix) {
  auto mu = residuals(y, p.phi);
  const double initial = residual_variance(std::span<const double>(mu).first(std::min(prefix, mu.size())));
  auto s2 = variance_recursion(mu, p.alpha0, p.alpha1, p.beta1, initial);
  return {std::move(mu), std::move(s2)};
}

inline std::pair<std::vector<double>, std::vector<double>> garch_attributes(const GarchFit& fit) {
  return {fit.mu, fit.sigma2};
}

/// Sample path of the GARCH(1,1) data-generating process, started from the
/// unconditional variance with y_{-1} = 0.
inline std::vector<double> simulate_garch(const GarchParams& p, std::size_t n, std::uint64_t seed) {
  if (!feasible(p)) throw ConstraintInfeasible("simulate_garch: parameters violate the GARCH(1,1) constraints");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> y(n);
  double s2 = p.alpha0 / (1.0 - p.alpha1 - p.beta1);
  double mu_prev = 0.0;
  double y_prev = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) s2 = p.alpha0 + p.alpha1 * mu_prev * mu_prev + p.beta1 * s2;
    const double mu = std::sqrt(s2) * z(rng);
    y[t] = p.phi * y_prev + mu;
    mu_prev = mu;
    y_prev = y[t];
  }
  return y;
}

namespace detail {

// Unconstrained coordinates: phi = phi0 + phi_scale * u0, alpha0 = exp(u1),
// persistence = logistic(u2), alpha1 share of persistence = logistic(u3).
struct Transform {
  double phi0 = 0.0;
  double phi_scale = 1.0;

  static double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }
  static double logit(double p) { return std::log(p / (1.0 - p)); }

  // Logistic arguments are clamped so the likelihood is flat once a weight
  // is numerically zero, which lets the simplex contract.
  GarchParams to_params(const double* u) const {
    const double persistence = logistic(std::clamp(u[2], -25.0, 25.0));
    const double share = logistic(std::clamp(u[3], -25.0, 25.0));
    return {phi0 + phi_scale * u[0], std::exp(u[1]), persistence * share, persistence * (1.0 - share)};
  }
  std::array<double, 4> from_params(double phi, double alpha0, double persistence, double share) const {
    return {(phi - phi0) / phi_scale, std::log(alpha0), logit(persistence), logit(share)};
  }
};

struct Objective {
  std::span<const double> y;
  Transform tf;
};

inline double negative_loglik(const gsl_vector* v, void* ctx) {
  const auto* obj = static_cast<const Objective*>(ctx);
  const double u[4] = {gsl_vector_get(v, 0), gsl_vector_get(v, 1), gsl_vector_get(v, 2), gsl_vector_get(v, 3)};
  const double ll = log_likelihood(obj->y, obj->tf.to_params(u));
  return std::isfinite(ll) ? -ll : std::numeric_limits<double>::max();
}

inline std::pair<std::array<double, 4>, double> nelder_mead(Objective& obj, const std::array<double, 4>& start) {
  gsl_set_error_handler_off();
  const gsl_multimin_fminimizer_type* type = gsl_multimin_fminimizer_nmsimplex2;
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(type, 4);
  gsl_vector* x = gsl_vector_alloc(4);
  gsl_vector* step = gsl_vector_alloc(4);
  for (std::size_t i = 0; i < 4; ++i) {
    gsl_vector_set(x, i, start[i]);
    gsl_vector_set(step, i, 0.5);
  }
  gsl_multimin_function fn{&negative_loglik, 4, &obj};
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  // Stops on a collapsed simplex, or when the best value has not moved for
  // 500 iterations (a flat direction keeps the simplex from collapsing).
  double last_f = s->fval;
  int stalled = 0;
  for (int iter = 0; iter < 20000; ++iter) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-9) == GSL_SUCCESS) break;
    if (last_f - s->fval > 1e-12 * std::max(1.0, std::abs(s->fval))) {
      last_f = s->fval;
      stalled = 0;
    } else if (++stalled >= 500) {
      break;
    }
  }
  std::array<double, 4> best{};
  for (std::size_t i = 0; i < 4; ++i) best[i] = gsl_vector_get(s->x, i);
  const double f = s->fval;
  gsl_vector_free(step);
  gsl_vector_free(x);
  gsl_multimin_fminimizer_free(s);
  return {best, f};
}

}  // namespace detail

/// Maximum-likelihood GARCH(1,1) fit of y_t = phi * y_{t-1} + mu_t.
/// Three fixed starting points, each polished by a restarted simplex.
inline GarchFit fit_garch11(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 100) throw SeriesTooShort("fit_garch11 needs at least 100 observations");
  for (double v : y)
    if (!std::isfinite(v)) throw ConstraintInfeasible("fit_garch11: non-finite input");

  double sxy = 0.0, sxx = 0.0;
  for (std::size_t t = 1; t < n; ++t) {
    sxy += y[t] * y[t - 1];
    sxx += y[t - 1] * y[t - 1];
  }
  const double phi_ols = sxx > 0.0 ? sxy / sxx : 0.0;
  const double var0 = residual_variance(residuals(y, phi_ols));
  double scale = 0.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  if (!(var0 > 1e-14 * std::max(1.0, scale * scale)))
    throw ConstraintInfeasible("fit_garch11: residual variance is zero");

  detail::Objective obj{y, {phi_ols, std::sqrt(var0 / sxx)}};
  const std::array<std::array<double, 2>, 3> starts{{{0.90, 0.10}, {0.50, 0.50}, {0.98, 0.05}}};

  std::array<double, 4> best_u{};
  double best_f = std::numeric_limits<double>::infinity();
  for (const auto& [persistence, share] : starts) {
    auto u = obj.tf.from_params(phi_ols, var0 * (1.0 - persistence), persistence, share);
    double f = std::numeric_limits<double>::infinity();
    for (int round = 0; round < 3; ++round) {
      const double before = f;
      std::tie(u, f) = detail::nelder_mead(obj, u);
      if (before - f < 1e-9) break;
    }
    if (f < best_f) {
      best_f = f;
      best_u = u;
    }
  }

  const GarchParams p = obj.tf.to_params(best_u.data());
  if (!std::isfinite(best_f) || best_f == std::numeric_limits<double>::max() || !std::isfinite(p.phi) ||
      !std::isfinite(p.alpha0) || !std::isfinite(p.alpha1) || !std::isfinite(p.beta1))
    throw OptimizerDiverged("fit_garch11: optimiser failed to reach a finite likelihood");
  if (!feasible(p)) throw ConstraintInfeasible("fit_garch11: optimum left the constraint set");

  GarchFit fit;
  fit.phi = p.phi;
  fit.alpha0 = p.alpha0;
  fit.alpha1 = p.alpha1;
  fit.beta1 = p.beta1;
  std::tie(fit.mu, fit.sigma2) = garch_attributes(y, p);
  fit.loglik = -best_f;
  return fit;
}

inline void write_fit_json(std::ostream& out, const GarchFit& f) {
  out << "{\n"
      << "  \"phi\": " << text::format_double(f.phi) << ",\n"
      << "  \"alpha0\": " << text::format_double(f.alpha0) << ",\n"
      << "  \"alpha1\": " << text::format_double(f.alpha1) << ",\n"
      << "  \"beta1\": " << text::format_double(f.beta1) << ",\n"
      << "  \"loglik\": " << text::format_double(f.loglik) << ",\n"
      << "  \"observations\": " << f.mu.size() << "\n"
      << "}\n";
}

}  // namespace atbilstm::garch
