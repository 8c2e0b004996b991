#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "sdamarl/nn/mlp.hpp"

namespace sdamarl::nn {

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  explicit AdamState(const ParamSet& like, AdamConfig cfg = {})
      : config(cfg), first_moment(zeros_like(like)), second_moment(zeros_like(like)) {}
  explicit AdamState(const Mlp& net, AdamConfig cfg = {}) : AdamState(net.params(), cfg) {}

  AdamConfig config;
  ParamSet first_moment;
  ParamSet second_moment;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam. Rejects the whole update (leaving params and
/// state untouched) when any gradient entry is NaN or infinite.
inline void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
  if (!same_shape(params, grads) || !same_shape(params, state.first_moment))
    throw DimensionError("adam_step: parameter, gradient and moment shapes must agree");
  if (!all_finite(grads)) throw NonFiniteGradient("adam_step: non-finite gradient, update rejected");

  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double corr1 = 1.0 - std::pow(c.beta1, t);
  const double corr2 = 1.0 - std::pow(c.beta2, t);

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = (c.beta2 * v.array() + (1.0 - c.beta2) * g.array().square()).matrix();
    p.array() -= c.learning_rate * (m.array() / corr1) / ((v.array() / corr2).sqrt() + c.epsilon);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    update(params[i].weight, grads[i].weight, state.first_moment[i].weight, state.second_moment[i].weight);
    update(params[i].bias, grads[i].bias, state.first_moment[i].bias, state.second_moment[i].bias);
  }
}

inline void adam_step(Mlp& net, const ParamSet& grads, AdamState& state) {
  if (!all_finite(grads)) throw NonFiniteGradient("adam_step: non-finite gradient, update rejected");
  adam_step(net.mutable_params(), grads, state);
}

}  // namespace sdamarl::nn
