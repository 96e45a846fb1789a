#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "atbilstm/date.hpp"
#include "atbilstm/error.hpp"
#include "atbilstm/garch.hpp"
#include "atbilstm/indicators.hpp"
#include "atbilstm/metrics.hpp"
#include "atbilstm/nn/checkpoint.hpp"
#include "atbilstm/nn/network.hpp"
#include "atbilstm/nn/rmsprop.hpp"
#include "atbilstm/text.hpp"

namespace atbilstm::pipeline {

using nn::Tensor;

// ---------------------------------------------------------------------------
// Price series to features
// ---------------------------------------------------------------------------

/// Which series the GARCH mean equation regresses on its own lag.
enum class GarchInput { Prices, Returns };

struct FeatureBuild {
  ind::FeatureMatrix matrix;
  garch::GarchFit fit;
  garch::AdfResult adf;  // on returns, no deterministic terms, one lag
};

/// With `fit_prefix` set, the GARCH parameters are estimated on the first
/// `fit_prefix` prices only and the attribute recursion is run forward from
/// there, so no feature row depends on later prices. Otherwise the whole
/// series is used for the fit.
inline FeatureBuild build_features(const io::PriceSeries& series, const ind::IndicatorConfig& cfg = {},
                                   GarchInput input = GarchInput::Prices,
                                   std::optional<std::size_t> fit_prefix = std::nullopt) {
  FeatureBuild out;
  const auto ret = ind::returns(series.prices, cfg.return_form);
  const std::span<const double> tail = std::span<const double>(ret).subspan(std::min<std::size_t>(1, ret.size()));
  const std::span<const double> y = input == GarchInput::Prices ? std::span<const double>(series.prices) : tail;
  const std::size_t prefix = std::min(fit_prefix.value_or(series.size()), series.size());
  // Returns start one observation later than prices.
  const std::size_t y_prefix = input == GarchInput::Prices ? prefix : (prefix > 0 ? prefix - 1 : 0);

  out.adf = garch::adf_test(tail.first(std::min(tail.size(), y_prefix)));
  out.fit = garch::fit_garch11(y.first(y_prefix));
  if (y_prefix < y.size()) {
    std::tie(out.fit.mu, out.fit.sigma2) = garch::garch_attributes(y, out.fit.params(), y_prefix);
  }
  if (input == GarchInput::Returns) {
    out.fit.mu.insert(out.fit.mu.begin(), ind::kInvalid);
    out.fit.sigma2.insert(out.fit.sigma2.begin(), ind::kInvalid);
  }
  out.fit.dates = series.dates;
  out.matrix = ind::build_feature_matrix(series, out.fit, cfg);
  return out;
}

// ---------------------------------------------------------------------------
// Sliding windows
// ---------------------------------------------------------------------------

/// windows[i] holds feature rows i .. i+T-1 (shape T x d) and targets[i] is
/// the return on the row after the window.
struct WindowedDataset {
  std::size_t length = 0;
  std::size_t features = 0;
  std::vector<Tensor> windows;
  std::vector<double> targets;
  std::vector<Day> window_end_dates;
  std::vector<Day> target_dates;

  std::size_t size() const { return windows.size(); }
};

inline WindowedDataset make_windows(const ind::FeatureMatrix& fm, std::size_t window_length) {
  if (window_length == 0) throw TooFewRows("window length must be positive");
  if (fm.rows() <= window_length)
    throw TooFewRows("need more than " + std::to_string(window_length) + " feature rows, have " +
                     std::to_string(fm.rows()));
  WindowedDataset ds;
  ds.length = window_length;
  ds.features = ind::kFeatureCount;
  const std::size_t count = fm.rows() - window_length;
  ds.windows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t end = i + window_length - 1;
    Tensor w({window_length, ds.features});
    for (std::size_t r = 0; r < window_length; ++r)
      for (std::size_t c = 0; c < ds.features; ++c) w(r, c) = fm.at(i + r, c);
    ds.windows.push_back(std::move(w));
    ds.targets.push_back(fm.target[end]);
    ds.window_end_dates.push_back(fm.dates[end]);
    ds.target_dates.push_back(fm.dates[end + 1]);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Feature scaling
// ---------------------------------------------------------------------------

/// Per-feature z-score. Constant features get std = 1 and are listed in
/// `zero_variance`. Targets are divided by `target_scale` (their root mean
/// square, uncentred so signs are kept) for training and predictions are
/// multiplied back.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<std::size_t> zero_variance;
  double target_scale = 1.0;

  bool empty() const { return mean.empty(); }

  Tensor apply(const Tensor& window) const {
    if (empty()) return window;
    Tensor out = window;
    const std::size_t d = mean.size();
    auto data = out.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = (data[i] - mean[i % d]) / std[i % d];
    return out;
  }
};

/// Statistics over every row of the selected windows.
inline Scaler fit_scaler(std::span<const Tensor* const> windows) {
  Scaler s;
  if (windows.empty()) return s;
  const std::size_t d = windows.front()->dim(1);
  s.mean.assign(d, 0.0);
  s.std.assign(d, 0.0);
  std::size_t rows = 0;
  for (const Tensor* w : windows) {
    for (std::size_t r = 0; r < w->dim(0); ++r)
      for (std::size_t c = 0; c < d; ++c) s.mean[c] += (*w)(r, c);
    rows += w->dim(0);
  }
  for (double& m : s.mean) m /= static_cast<double>(rows);
  for (const Tensor* w : windows)
    for (std::size_t r = 0; r < w->dim(0); ++r)
      for (std::size_t c = 0; c < d; ++c) s.std[c] += ((*w)(r, c) - s.mean[c]) * ((*w)(r, c) - s.mean[c]);
  for (std::size_t c = 0; c < d; ++c) {
    s.std[c] = std::sqrt(s.std[c] / static_cast<double>(rows));
    if (!(s.std[c] > 1e-12 * std::max(1.0, std::abs(s.mean[c])))) {
      s.std[c] = 1.0;
      s.zero_variance.push_back(c);
    }
  }
  return s;
}

/// Root mean square of the selected targets, or 1 if they are all zero.
inline double target_scale(std::span<const double> targets, std::span<const std::size_t> idx) {
  double ss = 0.0;
  for (auto i : idx) ss += targets[i] * targets[i];
  const double rms = idx.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(idx.size()));
  return rms > 0.0 ? rms : 1.0;
}

/// Network score for one raw window, in return units.
inline double predict_window(const nn::NetworkParams& params, const Scaler& scaler, const Tensor& window) {
  return nn::predict(params, scaler.apply(window)) * scaler.target_scale;
}

struct NormalizedWindows {
  std::vector<Tensor> train;
  std::vector<Tensor> apply;
  Scaler scaler;
};

/// Fits the scaler on `train_windows` only and applies it to both sets.
inline NormalizedWindows normalize_features(std::span<const Tensor> train_windows,
                                            std::span<const Tensor> apply_windows) {
  std::vector<const Tensor*> ptrs;
  for (const auto& w : train_windows) ptrs.push_back(&w);
  NormalizedWindows out;
  out.scaler = fit_scaler(ptrs);
  for (const auto& w : train_windows) out.train.push_back(out.scaler.apply(w));
  for (const auto& w : apply_windows) out.apply.push_back(out.scaler.apply(w));
  return out;
}

// ---------------------------------------------------------------------------
// Forecasters
// ---------------------------------------------------------------------------

/// Anything walk_forward can drive. train() sees the windows it may learn
/// from; predict() scores one window.
template <typename F>
concept Forecaster = requires(F& f, const WindowedDataset& ds, std::span<const std::size_t> idx, std::size_t i,
                              std::size_t epochs) {
  f.train(ds, idx, idx, epochs);
  { f.predict(ds, i) } -> std::convertible_to<double>;
};

/// Recurrent model trained by mini-batch MSE with RMSProp.
class NetworkForecaster {
 public:
  NetworkForecaster(nn::Variant variant, const nn::HyperParams& hyper, std::uint64_t seed)
      : hyper_(hyper),
        params_(nn::init_network(variant, ind::kFeatureCount, hyper.units, hyper.dropout_rate, seed)),
        optimizer_(nn::make_rmsprop(params_, hyper.learning_rate, hyper.rho, hyper.delta)),
        rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
    params_.bn_eps = hyper.bn_eps;
  }

  /// Refits the scaler on `available`, then runs `epochs` passes over
  /// `fit_on`. Zero epochs leaves model and scaler untouched.
  void train(const WindowedDataset& ds, std::span<const std::size_t> available, std::span<const std::size_t> fit_on,
             std::size_t epochs, std::vector<double>* loss_curve = nullptr) {
    if (epochs == 0 || available.empty()) return;
    std::vector<const Tensor*> ptrs;
    for (auto i : available) ptrs.push_back(&ds.windows[i]);
    scaler_ = fit_scaler(ptrs);
    scaler_.target_scale = target_scale(ds.targets, available);
    if (fit_on.size() < 2) return;

    std::vector<Tensor> x;
    std::vector<double> y;
    x.reserve(fit_on.size());
    for (auto i : fit_on) {
      x.push_back(scaler_.apply(ds.windows[i]));
      y.push_back(ds.targets[i] / scaler_.target_scale);
    }
    for (std::size_t e = 0; e < epochs; ++e) {
      const double loss = run_epoch(x, y);
      if (loss_curve) loss_curve->push_back(loss);
    }
  }

  double predict(const WindowedDataset& ds, std::size_t i) const {
    return predict_window(params_, scaler_, ds.windows[i]);
  }

  const nn::NetworkParams& params() const { return params_; }
  const nn::RmsPropState& optimizer() const { return optimizer_; }
  const Scaler& scaler() const { return scaler_; }

  nn::Checkpoint checkpoint() const {
    nn::Checkpoint ck{params_, optimizer_, {}};
    ck.extras["scaler.mean"] = scaler_.mean;
    ck.extras["scaler.std"] = scaler_.std;
    ck.extras["scaler.target_scale"] = {scaler_.target_scale};
    return ck;
  }

 private:
  double run_epoch(const std::vector<Tensor>& x, const std::vector<double>& y) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);

    // A trailing batch of one is merged into the previous batch.
    const std::size_t bs = std::max<std::size_t>(hyper_.batch_size, 2);
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t s = 0; s < order.size(); s += bs) batches.emplace_back(s, std::min(order.size(), s + bs));
    if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
      batches[batches.size() - 2].second = batches.back().second;
      batches.pop_back();
    }

    const std::size_t steps = x.front().dim(0), d = x.front().dim(1);
    double total = 0.0;
    for (const auto& [lo, hi] : batches) {
      Tensor batch({hi - lo, steps, d});
      std::vector<double> targets;
      auto dst = batch.data().begin();
      for (std::size_t k = lo; k < hi; ++k) {
        dst = std::copy(x[order[k]].data().begin(), x[order[k]].data().end(), dst);
        targets.push_back(y[order[k]]);
      }
      auto fwd = nn::forward(params_, batch, nn::Mode::Train, rng_());
      const auto loss = nn::mse(fwd.scores, targets);
      if (!std::isfinite(loss.value))
        throw NonFiniteLoss("non-finite training loss after " + std::to_string(optimizer_.steps) + " optimiser steps");
      const auto grads = nn::backward(params_, fwd.cache, loss.grad);
      nn::update_running_stats(params_, fwd.cache);
      nn::rmsprop_step(optimizer_, params_, grads);
      total += loss.value * static_cast<double>(hi - lo);
    }
    return total / static_cast<double>(x.size());
  }

  nn::HyperParams hyper_;
  nn::NetworkParams params_;
  nn::RmsPropState optimizer_;
  Scaler scaler_;
  std::mt19937_64 rng_;
};

static_assert(Forecaster<NetworkForecaster>);

struct TrainedModel {
  nn::Checkpoint checkpoint;
  std::vector<double> loss_curve;
};

/// Trains on windows [0, train_count) (all windows by default).
inline TrainedModel train_global(const WindowedDataset& ds, nn::Variant variant, const nn::HyperParams& hyper,
                                 std::uint64_t seed, std::optional<std::size_t> train_count = std::nullopt) {
  const std::size_t n = std::min(train_count.value_or(ds.size()), ds.size());
  if (n < 2) throw TooFewRows("train_global needs at least two windows");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  NetworkForecaster model(variant, hyper, seed);
  TrainedModel out;
  model.train(ds, idx, idx, hyper.epochs, &out.loss_curve);
  out.checkpoint = model.checkpoint();
  return out;
}

/// Restores the scaler stored alongside a network checkpoint.
inline Scaler scaler_from(const nn::Checkpoint& ck) {
  Scaler s;
  if (auto it = ck.extras.find("scaler.mean"); it != ck.extras.end()) s.mean = it->second;
  if (auto it = ck.extras.find("scaler.std"); it != ck.extras.end()) s.std = it->second;
  if (auto it = ck.extras.find("scaler.target_scale"); it != ck.extras.end() && it->second.size() == 1)
    s.target_scale = it->second.front();
  if (s.mean.size() != s.std.size()) throw Error("checkpoint scaler is inconsistent");
  return s;
}

// ---------------------------------------------------------------------------
// Walk-forward backtest
// ---------------------------------------------------------------------------

struct WalkForwardConfig {
  std::size_t warmup_days = 300;
  std::size_t retrain_epochs = 5;
  std::size_t retrain_windows = 300;
  std::size_t window_length = 30;
  std::uint64_t seed = 0;
};

struct DailyRecord {
  Day date;
  double predicted = 0.0;
  double realized = 0.0;
  bool long_position = false;
  double equity = 0.0;
};

struct BacktestSummary {
  std::optional<double> accuracy;
  std::optional<double> auc;
  double total_return = 0.0;
  double annualized_return = 0.0;
  std::size_t trading_days = 0;
};

struct BacktestReport {
  double initial_capital = 1000.0;
  std::vector<DailyRecord> days;
  BacktestSummary summary;
};

/// Calendar is daily, so a year is 365 records.
inline BacktestSummary summarize(std::span<const double> predicted, std::span<const double> realized,
                                 std::span<const double> equity) {
  BacktestSummary s;
  const auto ev = metrics::evaluate(predicted, realized);
  s.accuracy = ev.accuracy;
  s.auc = ev.auc;
  s.trading_days = predicted.size();
  if (!predicted.empty()) {
    const double growth = equity.back() / equity.front();
    s.total_return = growth - 1.0;
    s.annualized_return = std::pow(growth, 365.0 / static_cast<double>(predicted.size())) - 1.0;
  }
  return s;
}

/// Trains on the warm-up period, then for each later window predicts the
/// next-day return from data up to the window end, records it, adds the
/// window to the training set and retrains incrementally.
template <Forecaster F>
BacktestReport walk_forward(const WindowedDataset& ds, std::size_t feature_rows, const WalkForwardConfig& cfg,
                            F& model, std::size_t warmup_epochs, double initial_capital = 1000.0) {
  if (cfg.warmup_days < cfg.window_length) throw TooShortHistory("warm-up shorter than the window length");
  if (feature_rows < cfg.warmup_days)
    throw TooShortHistory("history of " + std::to_string(feature_rows) + " rows is shorter than the " +
                          std::to_string(cfg.warmup_days) + "-day warm-up");

  // Window i covers rows i .. i+T-1; its target is row i+T.
  const std::size_t first_trade = cfg.warmup_days - cfg.window_length;
  std::vector<std::size_t> available(std::min(first_trade, ds.size()));
  std::iota(available.begin(), available.end(), std::size_t{0});
  model.train(ds, std::span<const std::size_t>(available), std::span<const std::size_t>(available), warmup_epochs);

  BacktestReport rep;
  rep.initial_capital = initial_capital;
  std::vector<double> pred, real;
  for (std::size_t i = first_trade; i < ds.size(); ++i) {
    pred.push_back(model.predict(ds, i));
    real.push_back(ds.targets[i]);
    rep.days.push_back({ds.target_dates[i], pred.back(), real.back(), pred.back() > 0.0, 0.0});

    if (i + 1 == ds.size() || cfg.retrain_epochs == 0) continue;
    available.push_back(i);
    const std::size_t keep = std::min(cfg.retrain_windows, available.size());
    const std::span<const std::size_t> all(available);
    model.train(ds, all, all.last(keep), cfg.retrain_epochs);
  }

  const auto equity = metrics::backtest_equity(pred, real, initial_capital);
  for (std::size_t k = 0; k < rep.days.size(); ++k) rep.days[k].equity = equity[k + 1];
  rep.summary = summarize(pred, real, equity);
  return rep;
}

/// Walk-forward run of a freshly initialised recurrent model.
inline std::pair<BacktestReport, nn::Checkpoint> walk_forward(const ind::FeatureMatrix& fm,
                                                              const WalkForwardConfig& cfg, nn::Variant variant,
                                                              const nn::HyperParams& hyper) {
  if (fm.rows() < cfg.warmup_days) throw TooShortHistory("feature history shorter than the warm-up period");
  const auto ds = make_windows(fm, cfg.window_length);
  NetworkForecaster model(variant, hyper, cfg.seed);
  auto rep = walk_forward(ds, fm.rows(), cfg, model, hyper.epochs);
  return {std::move(rep), model.checkpoint()};
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

inline void write_report_csv(std::ostream& out, const BacktestReport& rep) {
  out << "date,predicted,realized,position,equity\n";
  for (const auto& d : rep.days)
    out << d.date.iso() << ',' << text::format_double(d.predicted) << ',' << text::format_double(d.realized) << ','
        << (d.long_position ? "long" : "flat") << ',' << text::format_double(d.equity) << '\n';
}

namespace detail {
inline std::string json_number(const std::optional<double>& v) { return v ? text::format_double(*v) : "null"; }
}  // namespace detail

inline void write_summary_json(std::ostream& out, const BacktestSummary& s, double initial_capital) {
  out << "{\n"
      << "  \"accuracy\": " << detail::json_number(s.accuracy) << ",\n"
      << "  \"auc\": " << detail::json_number(s.auc) << ",\n"
      << "  \"initial_capital\": " << text::format_double(initial_capital) << ",\n"
      << "  \"total_return\": " << text::format_double(s.total_return) << ",\n"
      << "  \"annualized_return\": " << text::format_double(s.annualized_return) << ",\n"
      << "  \"trading_days\": " << s.trading_days << "\n"
      << "}\n";
}

inline void write_loss_csv(std::ostream& out, std::span<const double> curve) {
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < curve.size(); ++e) out << e + 1 << ',' << text::format_double(curve[e]) << '\n';
}

}  // namespace atbilstm::pipeline
