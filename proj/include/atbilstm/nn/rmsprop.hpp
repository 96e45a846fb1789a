#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "atbilstm/nn/network.hpp"
#include "atbilstm/nn/tensor.hpp"

namespace atbilstm::nn {

/// RMSProp: r <- rho * r + (1 - rho) * g*g, then
/// theta <- theta - learning_rate / sqrt(delta + r) * g.
struct RmsPropState {
  std::vector<Tensor> r;
  double rho = 0.9;
  double learning_rate = 0.01;
  double delta = 1e-8;
  std::size_t steps = 0;
};

inline RmsPropState make_rmsprop(std::span<const Tensor* const> params, double learning_rate, double rho = 0.9,
                                 double delta = 1e-8) {
  RmsPropState s;
  s.rho = rho;
  s.learning_rate = learning_rate;
  s.delta = delta;
  for (const Tensor* p : params) s.r.emplace_back(p->shape());
  return s;
}

inline void rmsprop_step(RmsPropState& state, std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
  require(params.size() == grads.size() && params.size() == state.r.size(), "rmsprop_step: tensor count");
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& theta = *params[k];
    const Tensor& g = *grads[k];
    Tensor& r = state.r[k];
    require(theta.same_shape(g) && theta.same_shape(r), "rmsprop_step: shape of tensor " + std::to_string(k));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      r[i] = state.rho * r[i] + (1.0 - state.rho) * g[i] * g[i];
      theta[i] -= state.learning_rate / std::sqrt(state.delta + r[i]) * g[i];
    }
  }
  ++state.steps;
}

inline std::vector<Tensor*> trainable_tensors(NetworkParams& p) {
  std::vector<Tensor*> out;
  p.visit_trainable([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

inline std::vector<const Tensor*> trainable_tensors(const NetworkParams& p) {
  std::vector<const Tensor*> out;
  p.visit_trainable([&](const std::string&, const Tensor& t) { out.push_back(&t); });
  return out;
}

inline RmsPropState make_rmsprop(const NetworkParams& p, double learning_rate, double rho = 0.9, double delta = 1e-8) {
  const auto ts = trainable_tensors(p);
  return make_rmsprop(std::span<const Tensor* const>(ts), learning_rate, rho, delta);
}

inline void rmsprop_step(RmsPropState& state, NetworkParams& params, const NetworkParams& grads) {
  const auto ps = trainable_tensors(params);
  const auto gs = trainable_tensors(grads);
  rmsprop_step(state, std::span<Tensor* const>(ps), std::span<const Tensor* const>(gs));
}

}  // namespace atbilstm::nn
