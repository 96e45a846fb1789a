#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "atbilstm/nn/tensor.hpp"

namespace atbilstm::nn {

// ---------------------------------------------------------------------------
// Softmax / attention
// ---------------------------------------------------------------------------

inline Vec softmax(const Vec& z) {
  const Vec e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

struct AttentionOutput {
  Vec context;
  Vec weights;
};

/// Dot-product scores of each hidden row against the query, softmax over
/// time, weighted sum of the hidden rows. `hidden_seq` is T x k.
inline AttentionOutput attention_forward(const Mat& hidden_seq, const Vec& query) {
  require(hidden_seq.rows() >= 1, "attention: empty sequence");
  require(hidden_seq.cols() == query.size(), "attention: query size differs from hidden size");
  AttentionOutput out;
  out.weights = softmax(hidden_seq * query);
  out.context = hidden_seq.transpose() * out.weights;
  return out;
}

struct AttentionCache {
  Mat weights;  // B x T
};

/// Batched attention over seq (T entries of B x k) with per-row queries.
inline Mat attention_batch_forward(const Seq& seq, const Mat& query, AttentionCache* cache) {
  const auto steps = static_cast<Eigen::Index>(seq.size());
  const auto b = query.rows();
  Mat scores(b, steps);
  for (Eigen::Index t = 0; t < steps; ++t) scores.col(t) = seq[static_cast<std::size_t>(t)].cwiseProduct(query).rowwise().sum();
  Mat w(b, steps);
  for (Eigen::Index i = 0; i < b; ++i) w.row(i) = softmax(scores.row(i).transpose()).transpose();
  Mat ctx = Mat::Zero(b, query.cols());
  for (Eigen::Index t = 0; t < steps; ++t)
    ctx += w.col(t).asDiagonal() * seq[static_cast<std::size_t>(t)];
  if (cache) cache->weights = std::move(w);
  return ctx;
}

/// Adds the hidden-state gradients to d_seq and returns d(query).
inline Mat attention_batch_backward(const Seq& seq, const Mat& query, const AttentionCache& cache,
                                    const Mat& d_ctx, Seq& d_seq) {
  const auto steps = static_cast<Eigen::Index>(seq.size());
  const Mat& w = cache.weights;
  Mat dw(w.rows(), steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto& h = seq[static_cast<std::size_t>(t)];
    dw.col(t) = d_ctx.cwiseProduct(h).rowwise().sum();
    d_seq[static_cast<std::size_t>(t)] += w.col(t).asDiagonal() * d_ctx;
  }
  const Vec inner = w.cwiseProduct(dw).rowwise().sum();
  const Mat ds = w.cwiseProduct(dw.colwise() - inner);
  Mat dq = Mat::Zero(query.rows(), query.cols());
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto& h = seq[static_cast<std::size_t>(t)];
    dq += ds.col(t).asDiagonal() * h;
    d_seq[static_cast<std::size_t>(t)] += ds.col(t).asDiagonal() * query;
  }
  return dq;
}

// ---------------------------------------------------------------------------
// Batch normalisation
// ---------------------------------------------------------------------------

struct BatchNormCache {
  Mat x_hat;
  RowVec inv_std;
  RowVec mean;
  RowVec var;
};

/// Per-feature normalisation over the batch rows (population variance),
/// then y = gamma * x_hat + beta. Infer mode uses the running statistics.
inline Mat batch_norm(const Mat& batch, const RowVec& gamma, const RowVec& beta, Mode mode, double eps,
                      const RowVec& running_mean, const RowVec& running_var, BatchNormCache* cache = nullptr) {
  require(batch.cols() == gamma.size() && batch.cols() == beta.size(), "batch_norm: feature size");
  RowVec mean, var;
  if (mode == Mode::Train) {
    if (batch.rows() < 2) throw BatchTooSmall();
    mean = batch.colwise().mean();
    var = (batch.rowwise() - mean).array().square().colwise().mean().matrix();
  } else {
    require(running_mean.size() == batch.cols() && running_var.size() == batch.cols(),
            "batch_norm: running statistics size");
    mean = running_mean;
    var = running_var;
  }
  const RowVec inv_std = (var.array() + eps).rsqrt().matrix();
  Mat x_hat = (batch.rowwise() - mean).array().rowwise() * inv_std.array();
  Mat y = (x_hat.array().rowwise() * gamma.array()).matrix();
  y.rowwise() += beta;
  if (cache) *cache = BatchNormCache{std::move(x_hat), inv_std, std::move(mean), std::move(var)};
  return y;
}

/// Train-mode backward. Accumulates d_gamma and d_beta; returns d_input.
inline Mat batch_norm_backward(const BatchNormCache& cache, const RowVec& gamma, const Mat& d_out, RowVec& d_gamma,
                               RowVec& d_beta) {
  const auto m = static_cast<double>(d_out.rows());
  d_gamma += d_out.cwiseProduct(cache.x_hat).colwise().sum();
  d_beta += d_out.colwise().sum();
  const Mat dx_hat = (d_out.array().rowwise() * gamma.array()).matrix();
  const RowVec sum_dx_hat = dx_hat.colwise().sum();
  const RowVec sum_dx_hat_xhat = dx_hat.cwiseProduct(cache.x_hat).colwise().sum();
  Mat dx = (m * dx_hat).rowwise() - sum_dx_hat;
  dx -= (cache.x_hat.array().rowwise() * sum_dx_hat_xhat.array()).matrix();
  return (dx.array().rowwise() * (cache.inv_std.array() / m)).matrix();
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

inline void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidRate(rate);
}

/// Inverted-dropout mask: 0 with probability `rate`, 1/(1-rate) otherwise.
inline Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  check_rate(rate);
  Mat mask(rows, cols);
  if (rate == 0.0) {
    mask.setOnes();
    return mask;
  }
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = keep(rng) ? scale : 0.0;
  return mask;
}

inline Tensor dropout(const Tensor& input, double rate, Mode mode, std::uint64_t seed) {
  check_rate(rate);
  if (mode == Mode::Infer || rate == 0.0) return input;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Tensor out = input;
  for (double& v : out.data()) v = keep(rng) ? v * scale : 0.0;
  return out;
}

}  // namespace atbilstm::nn
