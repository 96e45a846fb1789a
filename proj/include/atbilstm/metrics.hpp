#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "atbilstm/error.hpp"

namespace atbilstm::metrics {

/// Area under the ROC curve (label > 0 is the positive class), by a
/// descending-threshold sweep with trapezoids over tied scores.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Twice the area, in units of (positive, negative) pairs.
  std::uint64_t tp = 0, fp = 0, area2 = 0;
  for (std::size_t k = 0; k < order.size();) {
    std::uint64_t p = 0, n = 0;
    const double s = scores[order[k]];
    for (; k < order.size() && scores[order[k]] == s; ++k) (labels[order[k]] > 0 ? p : n) += 1;
    area2 += n * (2 * tp + p);
    tp += p;
    fp += n;
  }
  if (tp == 0 || fp == 0) throw OneClassOnly();
  return static_cast<double>(area2) / static_cast<double>(2 * tp * fp);
}

struct Evaluation {
  std::optional<double> accuracy;  // empty when every realized return is zero
  std::optional<double> auc;       // empty when only one direction occurs
  std::size_t days = 0;            // days with a nonzero realized return
};

/// Directional accuracy and AUC of scores against realized returns.
/// Days with a zero realized return are excluded from both.
inline Evaluation evaluate(std::span<const double> scores, std::span<const double> realized) {
  if (scores.size() != realized.size()) throw Error("evaluate: scores and returns differ in length");
  Evaluation e;
  std::vector<double> s;
  std::vector<int> up;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (realized[i] == 0.0) continue;
    const bool pos = realized[i] > 0.0;
    if ((pos && scores[i] > 0.0) || (!pos && scores[i] < 0.0)) ++hits;
    s.push_back(scores[i]);
    up.push_back(pos);
  }
  e.days = s.size();
  if (!s.empty()) e.accuracy = static_cast<double>(hits) / static_cast<double>(s.size());
  const auto positives = std::count(up.begin(), up.end(), 1);
  if (positives > 0 && static_cast<std::size_t>(positives) < up.size()) e.auc = roc_auc(s, up);
  return e;
}

/// Long-or-flat compounding: long on day t iff predictions[t] > 0, then
/// equity_t = equity_{t-1} * (1 + realized_t). Returns n + 1 values
/// starting with `initial`.
inline std::vector<double> backtest_equity(std::span<const double> predictions, std::span<const double> realized,
                                           double initial = 1000.0) {
  if (predictions.size() != realized.size()) throw Error("backtest_equity: length mismatch");
  std::vector<double> equity{initial};
  equity.reserve(predictions.size() + 1);
  for (std::size_t t = 0; t < predictions.size(); ++t)
    equity.push_back(predictions[t] > 0.0 ? equity.back() * (1.0 + realized[t]) : equity.back());
  return equity;
}

}  // namespace atbilstm::metrics
