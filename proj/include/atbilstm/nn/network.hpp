#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atbilstm/nn/layers.hpp"
#include "atbilstm/nn/lstm.hpp"
#include "atbilstm/nn/tensor.hpp"

namespace atbilstm::nn {

enum class Variant { Lstm, BiLstm, AtBiLstm };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Lstm: return "lstm";
    case Variant::BiLstm: return "bilstm";
    case Variant::AtBiLstm: return "at-bilstm";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  for (auto v : {Variant::Lstm, Variant::BiLstm, Variant::AtBiLstm})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

struct HyperParams {
  std::size_t units = 32;  // per direction
  std::size_t batch_size = 128;
  double learning_rate = 0.01;
  std::size_t epochs = 300;
  double dropout_rate = 0.2;
  double bn_eps = 1e-5;
  double rho = 0.9;
  double delta = 1e-8;
};

/// Published per-variant settings: units, batch size, learning rate, epochs.
inline HyperParams table_hyperparams(Variant v) {
  HyperParams h;
  switch (v) {
    case Variant::Lstm: h.units = 128, h.learning_rate = 0.01; break;
    case Variant::BiLstm: h.units = 64, h.learning_rate = 0.001; break;
    case Variant::AtBiLstm: h.units = 32, h.learning_rate = 0.01; break;
  }
  h.batch_size = 128;
  h.epochs = 300;
  return h;
}

struct BatchNormParams {
  Tensor gamma, beta;
  Tensor running_mean, running_var;
};

/// Trainable tensors of one model plus batch-norm running statistics.
///
/// Wiring: layer1 -> batch norm (per time step) -> dropout -> layer2 ->
/// [attention, At-BiLSTM only] -> linear head. The head sees the final
/// hidden state (forward h at T-1, backward h at 0) and, with attention,
/// the context vector ahead of it.
struct NetworkParams {
  Variant variant = Variant::AtBiLstm;
  std::size_t input_size = 0;
  std::size_t hidden = 0;
  RecurrentLayer layer1, layer2;
  BatchNormParams bn;
  Tensor head_w;  // 1 x head_input()
  Tensor head_b;  // 1
  double dropout_rate = 0.0;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;

  bool bidirectional() const { return variant != Variant::Lstm; }
  bool attention() const { return variant == Variant::AtBiLstm; }
  std::size_t layer_output() const { return hidden * (bidirectional() ? 2 : 1); }
  std::size_t head_input() const { return layer_output() * (attention() ? 2 : 1); }

  template <typename Self, typename F>
  static void visit_trainable(Self& self, F&& f) {
    RecurrentLayer::visit(self.layer1, "layer1", f);
    f(std::string("bn.gamma"), self.bn.gamma);
    f(std::string("bn.beta"), self.bn.beta);
    RecurrentLayer::visit(self.layer2, "layer2", f);
    f(std::string("head.w"), self.head_w);
    f(std::string("head.b"), self.head_b);
  }
  template <typename F>
  void visit_trainable(F&& f) { visit_trainable(*this, f); }
  template <typename F>
  void visit_trainable(F&& f) const { visit_trainable(*this, f); }

  /// Trainable tensors followed by the running statistics.
  template <typename F>
  void visit_all(F&& f) {
    visit_trainable(f);
    f(std::string("bn.running_mean"), bn.running_mean);
    f(std::string("bn.running_var"), bn.running_var);
  }
  template <typename F>
  void visit_all(F&& f) const {
    visit_trainable(f);
    f(std::string("bn.running_mean"), bn.running_mean);
    f(std::string("bn.running_var"), bn.running_var);
  }
};

/// All-zero parameters (gamma included) with the given layout.
inline NetworkParams zero_network(Variant variant, std::size_t input, std::size_t hidden, double dropout_rate = 0.0) {
  check_rate(dropout_rate);
  NetworkParams p;
  p.variant = variant;
  p.input_size = input;
  p.hidden = hidden;
  p.dropout_rate = dropout_rate;
  p.layer1.fwd = LstmCell::zeros(input, hidden);
  if (p.bidirectional()) p.layer1.bwd = LstmCell::zeros(input, hidden);
  const std::size_t k = p.layer_output();
  p.layer2.fwd = LstmCell::zeros(k, hidden);
  if (p.bidirectional()) p.layer2.bwd = LstmCell::zeros(k, hidden);
  p.bn.gamma = Tensor({k});
  p.bn.beta = Tensor({k});
  p.bn.running_mean = Tensor({k});
  p.bn.running_var = Tensor({k}, 1.0);
  p.head_w = Tensor({1, p.head_input()});
  p.head_b = Tensor({1});
  return p;
}

/// Xavier-uniform weights, forget bias 1, gamma 1, beta 0.
inline NetworkParams init_network(Variant variant, std::size_t input, std::size_t hidden, double dropout_rate,
                                  std::uint64_t seed) {
  NetworkParams p = zero_network(variant, input, hidden, dropout_rate);
  std::mt19937_64 rng(seed);
  const std::size_t k = p.layer_output();
  p.layer1.fwd = LstmCell::random(input, hidden, rng);
  if (p.bidirectional()) p.layer1.bwd = LstmCell::random(input, hidden, rng);
  p.layer2.fwd = LstmCell::random(k, hidden, rng);
  if (p.bidirectional()) p.layer2.bwd = LstmCell::random(k, hidden, rng);
  p.bn.gamma.fill(1.0);
  xavier_uniform(p.head_w, p.head_input(), 1, rng);
  return p;
}

/// Zero tensors shaped like every trainable tensor of `p`.
inline NetworkParams zero_gradients(const NetworkParams& p) {
  NetworkParams g = zero_network(p.variant, p.input_size, p.hidden, p.dropout_rate);
  g.bn.running_var.fill(0.0);
  return g;
}

struct ForwardCache {
  Mode mode = Mode::Train;
  bool consumed = false;
  std::size_t steps = 0;
  RecurrentCache layer1;
  std::vector<BatchNormCache> bn;
  std::vector<Mat> masks;
  RecurrentCache layer2;
  Seq layer2_out;
  Mat query;
  AttentionCache attention;
  Mat head_in;
};

struct ForwardResult {
  std::vector<double> scores;
  ForwardCache cache;
};

namespace detail {

inline Mat final_state(const NetworkParams& p, const Seq& out) {
  if (!p.bidirectional()) return out.back();
  const auto h = static_cast<Eigen::Index>(p.hidden);
  Mat q(out.back().rows(), 2 * h);
  q << out.back().leftCols(h), out.front().rightCols(h);
  return q;
}

}  // namespace detail

/// Scores a batch of windows shaped (batch, time, features). `seed` drives
/// the dropout masks in train mode.
inline ForwardResult forward(const NetworkParams& p, const Tensor& batch, Mode mode, std::uint64_t seed = 0) {
  require(batch.rank() == 3 && batch.dim(2) == p.input_size, "forward: batch must be (batch, time, input_size)");
  require(batch.dim(1) >= 1 && batch.dim(0) >= 1, "forward: empty batch");
  const bool train = mode == Mode::Train;
  ForwardResult res;
  ForwardCache& c = res.cache;
  c.mode = mode;
  c.steps = batch.dim(1);

  const Seq x = to_sequence(batch);
  Seq a = recurrent_forward(p.layer1, x, train ? &c.layer1 : nullptr);

  const RowVec gamma = p.bn.gamma.vector().transpose();
  const RowVec beta = p.bn.beta.vector().transpose();
  const RowVec rm = p.bn.running_mean.vector().transpose();
  const RowVec rv = p.bn.running_var.vector().transpose();
  if (train) {
    c.bn.resize(c.steps);
    c.masks.reserve(c.steps);
  }
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < c.steps; ++t) {
    a[t] = batch_norm(a[t], gamma, beta, mode, p.bn_eps, rm, rv, train ? &c.bn[t] : nullptr);
    if (train && p.dropout_rate > 0.0) {
      c.masks.push_back(dropout_mask(a[t].rows(), a[t].cols(), p.dropout_rate, rng));
      a[t] = a[t].cwiseProduct(c.masks.back());
    }
  }

  Seq h = recurrent_forward(p.layer2, a, train ? &c.layer2 : nullptr);
  Mat q = detail::final_state(p, h);
  Mat z;
  if (p.attention()) {
    AttentionCache att;
    const Mat ctx = attention_batch_forward(h, q, &att);
    z.resize(q.rows(), ctx.cols() + q.cols());
    z << ctx, q;
    c.attention = std::move(att);
  } else {
    z = q;
  }
  const Vec scores = (z * p.head_w.matrix().transpose()).col(0).array() + p.head_b[0];
  res.scores.assign(scores.data(), scores.data() + scores.size());
  if (train) {
    c.layer2_out = std::move(h);
    c.query = std::move(q);
    c.head_in = std::move(z);
  }
  return res;
}

/// Inference-mode score of one (T x d) window.
inline double predict(const NetworkParams& p, const Tensor& window) {
  require(window.rank() == 2, "predict: window must be (time, features)");
  Tensor b({1, window.dim(0), window.dim(1)});
  std::copy(window.data().begin(), window.data().end(), b.data().begin());
  return forward(p, b, Mode::Infer).scores[0];
}

/// Reverse pass of a train-mode forward. `loss_grad` holds d(loss)/d(score)
/// per batch row. A cache can be consumed once.
inline NetworkParams backward(const NetworkParams& p, ForwardCache& c, std::span<const double> loss_grad) {
  if (c.consumed) throw StaleCache();
  if (c.mode != Mode::Train) throw Error("backward requires a train-mode forward pass");
  require(static_cast<Eigen::Index>(loss_grad.size()) == c.head_in.rows(), "backward: loss gradient size");
  c.consumed = true;

  NetworkParams g = zero_gradients(p);
  const Eigen::Map<const Vec> dy(loss_grad.data(), static_cast<Eigen::Index>(loss_grad.size()));
  g.head_w.matrix() += dy.transpose() * c.head_in;
  g.head_b[0] += dy.sum();
  const Mat dz = dy * p.head_w.matrix();

  const auto k = static_cast<Eigen::Index>(p.layer_output());
  Seq dh(c.steps, Mat::Zero(dz.rows(), k));
  Mat dq;
  if (p.attention()) {
    dq = dz.rightCols(k);
    dq += attention_batch_backward(c.layer2_out, c.query, c.attention, dz.leftCols(k), dh);
  } else {
    dq = dz;
  }
  if (p.bidirectional()) {
    const auto h = static_cast<Eigen::Index>(p.hidden);
    dh.back().leftCols(h) += dq.leftCols(h);
    dh.front().rightCols(h) += dq.rightCols(h);
  } else {
    dh.back() += dq;
  }

  Seq da = recurrent_backward(p.layer2, c.layer2, dh, g.layer2);
  const RowVec gamma = p.bn.gamma.vector().transpose();
  RowVec d_gamma = RowVec::Zero(k), d_beta = RowVec::Zero(k);
  for (std::size_t t = 0; t < c.steps; ++t) {
    if (!c.masks.empty()) da[t] = da[t].cwiseProduct(c.masks[t]);
    da[t] = batch_norm_backward(c.bn[t], gamma, da[t], d_gamma, d_beta);
  }
  g.bn.gamma.vector() += d_gamma.transpose();
  g.bn.beta.vector() += d_beta.transpose();
  recurrent_backward(p.layer1, c.layer1, da, g.layer1);
  return g;
}

/// Folds the batch statistics of a train-mode pass into the running
/// averages: running = momentum * running + (1 - momentum) * mean over steps.
inline void update_running_stats(NetworkParams& p, const ForwardCache& c) {
  if (c.mode != Mode::Train || c.bn.empty()) return;
  RowVec mean = RowVec::Zero(c.bn.front().mean.size()), var = RowVec::Zero(mean.size());
  for (const auto& s : c.bn) {
    mean += s.mean;
    var += s.var;
  }
  mean /= static_cast<double>(c.bn.size());
  var /= static_cast<double>(c.bn.size());
  p.bn.running_mean.vector() = p.bn_momentum * p.bn.running_mean.vector() + (1.0 - p.bn_momentum) * mean.transpose();
  p.bn.running_var.vector() = p.bn_momentum * p.bn.running_var.vector() + (1.0 - p.bn_momentum) * var.transpose();
}

struct Loss {
  double value = 0.0;
  std::vector<double> grad;
};

/// Mean squared error and its gradient with respect to each score.
inline Loss mse(std::span<const double> scores, std::span<const double> targets) {
  if (scores.size() != targets.size()) throw ShapeMismatch("mse: scores and targets differ in length");
  Loss l;
  l.grad.resize(scores.size());
  const double n = static_cast<double>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double e = scores[i] - targets[i];
    l.value += e * e / n;
    l.grad[i] = 2.0 * e / n;
  }
  return l;
}

}  // namespace atbilstm::nn
