#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include "atbilstm/nn/tensor.hpp"

namespace atbilstm::nn {

/// Gate weights for one LSTM direction. W_* are hidden x input, U_* are
/// hidden x hidden, b_* have length hidden.
struct LstmCell {
  Tensor w_f, w_i, w_o, w_c;
  Tensor u_f, u_i, u_o, u_c;
  Tensor b_f, b_i, b_o, b_c;

  std::size_t hidden() const { return b_f.size(); }
  std::size_t input() const { return w_f.rank() == 2 ? w_f.dim(1) : 0; }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("w_f", self.w_f), f("w_i", self.w_i), f("w_o", self.w_o), f("w_c", self.w_c);
    f("u_f", self.u_f), f("u_i", self.u_i), f("u_o", self.u_o), f("u_c", self.u_c);
    f("b_f", self.b_f), f("b_i", self.b_i), f("b_o", self.b_o), f("b_c", self.b_c);
  }
  template <typename F>
  void visit(F&& f) { visit(*this, f); }
  template <typename F>
  void visit(F&& f) const { visit(*this, f); }

  static LstmCell zeros(std::size_t input, std::size_t hidden) {
    LstmCell c;
    for (Tensor* w : {&c.w_f, &c.w_i, &c.w_o, &c.w_c}) *w = Tensor({hidden, input});
    for (Tensor* u : {&c.u_f, &c.u_i, &c.u_o, &c.u_c}) *u = Tensor({hidden, hidden});
    for (Tensor* b : {&c.b_f, &c.b_i, &c.b_o, &c.b_c}) *b = Tensor({hidden});
    return c;
  }

  /// Xavier-uniform weights, zero biases except the forget gate at 1.
  static LstmCell random(std::size_t input, std::size_t hidden, std::mt19937_64& rng) {
    LstmCell c = zeros(input, hidden);
    for (Tensor* w : {&c.w_f, &c.w_i, &c.w_o, &c.w_c}) xavier_uniform(*w, input, hidden, rng);
    for (Tensor* u : {&c.u_f, &c.u_i, &c.u_o, &c.u_c}) xavier_uniform(*u, hidden, hidden, rng);
    c.b_f.fill(1.0);
    return c;
  }
};

namespace detail {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Gate blocks stacked in f, i, o, c order.
struct StackedWeights {
  Mat w;     // 4H x input
  Mat u;     // 4H x H
  RowVec b;  // 4H

  StackedWeights() = default;
  explicit StackedWeights(const LstmCell& p) {
    const auto h = static_cast<Eigen::Index>(p.hidden());
    const auto in = static_cast<Eigen::Index>(p.input());
    w.resize(4 * h, in);
    u.resize(4 * h, h);
    b.resize(4 * h);
    const Tensor* ws[] = {&p.w_f, &p.w_i, &p.w_o, &p.w_c};
    const Tensor* us[] = {&p.u_f, &p.u_i, &p.u_o, &p.u_c};
    const Tensor* bs[] = {&p.b_f, &p.b_i, &p.b_o, &p.b_c};
    for (Eigen::Index g = 0; g < 4; ++g) {
      w.middleRows(g * h, h) = ws[g]->matrix();
      u.middleRows(g * h, h) = us[g]->matrix();
      b.segment(g * h, h) = bs[g]->vector().transpose();
    }
  }
};

}  // namespace detail

/// Intermediates of one batched LSTM step.
struct LstmStepCache {
  Mat x, h_prev, c_prev;
  Mat gates;  // B x 4H activations: f, i, o, candidate
  Mat c, tanh_c;
};

inline std::pair<Mat, Mat> lstm_step(const detail::StackedWeights& sw, const Mat& x, const Mat& h_prev,
                                     const Mat& c_prev, LstmStepCache* cache) {
  const Eigen::Index h = sw.u.cols();
  Mat z = x * sw.w.transpose() + h_prev * sw.u.transpose();
  z.rowwise() += sw.b;
  z.leftCols(3 * h) = z.leftCols(3 * h).unaryExpr(&detail::sigmoid);
  z.rightCols(h) = z.rightCols(h).array().tanh().matrix();
  Mat c = z.middleCols(0, h).cwiseProduct(c_prev) + z.middleCols(h, h).cwiseProduct(z.rightCols(h));
  Mat tanh_c = c.array().tanh().matrix();
  Mat h_t = z.middleCols(2 * h, h).cwiseProduct(tanh_c);
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->gates = std::move(z);
    cache->c = c;
    cache->tanh_c = std::move(tanh_c);
  }
  return {std::move(h_t), std::move(c)};
}

struct LstmCellOutput {
  Vec h;
  Vec c;
  LstmStepCache cache;
};

/// Single-sample LSTM step.
inline LstmCellOutput lstm_cell_forward(const LstmCell& p, const Vec& x, const Vec& h_prev, const Vec& c_prev) {
  require(static_cast<std::size_t>(x.size()) == p.input(), "lstm_cell_forward: input size");
  require(static_cast<std::size_t>(h_prev.size()) == p.hidden(), "lstm_cell_forward: hidden state size");
  require(static_cast<std::size_t>(c_prev.size()) == p.hidden(), "lstm_cell_forward: cell state size");
  LstmCellOutput out;
  auto [h, c] = lstm_step(detail::StackedWeights(p), x.transpose(), h_prev.transpose(), c_prev.transpose(),
                          &out.cache);
  out.h = h.transpose();
  out.c = c.transpose();
  return out;
}

/// One direction run over a whole sequence.
struct LstmSeqCache {
  detail::StackedWeights weights;
  bool reverse = false;
  std::vector<LstmStepCache> steps;  // in processing order
};

inline Seq lstm_sequence_forward(const LstmCell& p, const Seq& x, bool reverse, LstmSeqCache* cache) {
  require(!x.empty(), "lstm: empty sequence");
  require(static_cast<std::size_t>(x.front().cols()) == p.input(), "lstm: input feature size");
  detail::StackedWeights sw(p);
  const auto steps = x.size();
  const auto b = x.front().rows();
  const auto h = static_cast<Eigen::Index>(p.hidden());
  Mat h_t = Mat::Zero(b, h), c_t = Mat::Zero(b, h);
  Seq out(steps);
  std::vector<LstmStepCache> caches(cache ? steps : 0);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    std::tie(h_t, c_t) = lstm_step(sw, x[t], h_t, c_t, cache ? &caches[k] : nullptr);
    out[t] = h_t;
  }
  if (cache) *cache = LstmSeqCache{std::move(sw), reverse, std::move(caches)};
  return out;
}

/// Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
inline Seq lstm_sequence_backward(const LstmSeqCache& cache, const Seq& d_out, LstmCell& grad) {
  const auto steps = cache.steps.size();
  const Eigen::Index h = cache.weights.u.cols();
  const Eigen::Index b = d_out.front().rows();
  Mat dw = Mat::Zero(cache.weights.w.rows(), cache.weights.w.cols());
  Mat du = Mat::Zero(cache.weights.u.rows(), cache.weights.u.cols());
  RowVec db = RowVec::Zero(4 * h);
  Mat dh_next = Mat::Zero(b, h), dc_next = Mat::Zero(b, h);
  Seq dx(steps);

  Mat dz(b, 4 * h);
  for (std::size_t k = steps; k-- > 0;) {
    const std::size_t t = cache.reverse ? steps - 1 - k : k;
    const auto& s = cache.steps[k];
    const auto f = s.gates.middleCols(0, h).array();
    const auto i = s.gates.middleCols(h, h).array();
    const auto o = s.gates.middleCols(2 * h, h).array();
    const auto g = s.gates.middleCols(3 * h, h).array();
    const auto tc = s.tanh_c.array();

    const Mat dh = d_out[t] + dh_next;
    const Eigen::ArrayXXd dc = dh.array() * o * (1.0 - tc.square()) + dc_next.array();
    dz.middleCols(0, h) = (dc * s.c_prev.array() * f * (1.0 - f)).matrix();
    dz.middleCols(h, h) = (dc * g * i * (1.0 - i)).matrix();
    dz.middleCols(2 * h, h) = (dh.array() * tc * o * (1.0 - o)).matrix();
    dz.middleCols(3 * h, h) = (dc * i * (1.0 - g.square())).matrix();

    dw.noalias() += dz.transpose() * s.x;
    du.noalias() += dz.transpose() * s.h_prev;
    db += dz.colwise().sum();
    dx[t] = dz * cache.weights.w;
    dh_next = dz * cache.weights.u;
    dc_next = (dc * f).matrix();
  }

  Tensor* ws[] = {&grad.w_f, &grad.w_i, &grad.w_o, &grad.w_c};
  Tensor* us[] = {&grad.u_f, &grad.u_i, &grad.u_o, &grad.u_c};
  Tensor* bs[] = {&grad.b_f, &grad.b_i, &grad.b_o, &grad.b_c};
  for (Eigen::Index gi = 0; gi < 4; ++gi) {
    ws[gi]->matrix() += dw.middleRows(gi * h, h);
    us[gi]->matrix() += du.middleRows(gi * h, h);
    bs[gi]->vector() += db.segment(gi * h, h).transpose();
  }
  return dx;
}

/// A recurrent layer: forward direction plus an optional backward one.
struct RecurrentLayer {
  LstmCell fwd;
  std::optional<LstmCell> bwd;

  bool bidirectional() const { return bwd.has_value(); }
  std::size_t output_size() const { return fwd.hidden() * (bidirectional() ? 2 : 1); }

  template <typename Self, typename F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    self.fwd.visit([&](const char* n, auto& t) { f(prefix + ".fwd." + n, t); });
    if (self.bwd) self.bwd->visit([&](const char* n, auto& t) { f(prefix + ".bwd." + n, t); });
  }
};

struct RecurrentCache {
  LstmSeqCache fwd;
  std::optional<LstmSeqCache> bwd;
};

/// Output at step t is [forward h_t, backward h_t] for a bidirectional layer.
inline Seq recurrent_forward(const RecurrentLayer& layer, const Seq& x, RecurrentCache* cache) {
  Seq f = lstm_sequence_forward(layer.fwd, x, false, cache ? &cache->fwd : nullptr);
  if (!layer.bwd) return f;
  LstmSeqCache bc;
  Seq r = lstm_sequence_forward(*layer.bwd, x, true, cache ? &bc : nullptr);
  if (cache) cache->bwd = std::move(bc);
  const auto h = f.front().cols();
  Seq out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    out[t].resize(f[t].rows(), 2 * h);
    out[t] << f[t], r[t];
  }
  return out;
}

inline Seq recurrent_backward(const RecurrentLayer& layer, const RecurrentCache& cache, const Seq& d_out,
                              RecurrentLayer& grad) {
  if (!layer.bwd) return lstm_sequence_backward(cache.fwd, d_out, grad.fwd);
  const auto h = static_cast<Eigen::Index>(layer.fwd.hidden());
  Seq df(d_out.size()), dr(d_out.size());
  for (std::size_t t = 0; t < d_out.size(); ++t) {
    df[t] = d_out[t].leftCols(h);
    dr[t] = d_out[t].rightCols(h);
  }
  Seq dx = lstm_sequence_backward(cache.fwd, df, grad.fwd);
  const Seq dx_r = lstm_sequence_backward(*cache.bwd, dr, *grad.bwd);
  for (std::size_t t = 0; t < dx.size(); ++t) dx[t] += dx_r[t];
  return dx;
}

/// Runs a single (T x d) sequence through a recurrent layer, returning T x k.
inline Mat bilstm_forward(const RecurrentLayer& layer, const Mat& sequence) {
  require(sequence.rows() >= 1, "bilstm_forward: empty sequence");
  Seq x(static_cast<std::size_t>(sequence.rows()));
  for (Eigen::Index t = 0; t < sequence.rows(); ++t) x[static_cast<std::size_t>(t)] = sequence.row(t);
  const Seq y = recurrent_forward(layer, x, nullptr);
  Mat out(sequence.rows(), static_cast<Eigen::Index>(layer.output_size()));
  for (Eigen::Index t = 0; t < sequence.rows(); ++t) out.row(t) = y[static_cast<std::size_t>(t)].row(0);
  return out;
}

}  // namespace atbilstm::nn
