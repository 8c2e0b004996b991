#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "sdamarl/nn/adam.hpp"
#include "sdamarl/nn/mlp.hpp"

namespace sdamarl::marl {

using nn::Matrix;
using nn::Mlp;
using nn::Vector;

/// Two online critics, their targets and optimizer state.
struct CriticPair {
  Mlp q1, q2, q1_target, q2_target;
  nn::AdamState opt1, opt2;

  CriticPair() = default;
  CriticPair(Mlp a, Mlp b, const nn::AdamConfig& cfg)
      : q1(std::move(a)), q2(std::move(b)), q1_target(q1), q2_target(q2), opt1(q1, cfg), opt2(q2, cfg) {}

  const Mlp& online(std::size_t k) const { return k == 0 ? q1 : q2; }

  void soft_update_targets(double tau) {
    nn::soft_update(q1_target, q1, tau);
    nn::soft_update(q2_target, q2, tau);
  }
};

inline Matrix hcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

/// y = r + gamma (1 - d) min_k max_j Q_k^target(s', a_j) over the candidate
/// joint actions; y = r on terminal rows.
inline Vector critic_target(const Vector& rewards, const Vector& done, const Matrix& next_obs,
                            const std::vector<Matrix>& candidates, const Mlp& q1_target, const Mlp& q2_target,
                            double gamma) {
  if (candidates.empty()) throw std::invalid_argument("critic_target: need at least one candidate");
  const Eigen::Index B = rewards.size();
  Vector best1 = Vector::Constant(B, -std::numeric_limits<double>::infinity());
  Vector best2 = best1;
  for (const auto& a : candidates) {
    const Matrix in = hcat(next_obs, a);
    best1 = best1.cwiseMax(q1_target.forward_batch(in).col(0));
    best2 = best2.cwiseMax(q2_target.forward_batch(in).col(0));
  }
  Vector y = rewards;
  for (Eigen::Index b = 0; b < B; ++b)
    if (done(b) == 0.0) y(b) += gamma * std::min(best1(b), best2(b));
  return y;
}

struct CriticLoss {
  double q1 = 0.0;
  double q2 = 0.0;
  bool applied = false;
};

/// Mean squared error of Q_k(s, a) against y and its parameter gradient.
inline std::pair<double, nn::ParamSet> critic_loss(const Mlp& q, const Matrix& input, const Vector& y) {
  nn::GradientTape tape;
  const Vector err = q.forward_batch(input, tape).col(0) - y;
  const double B = static_cast<double>(y.size());
  Matrix g = (2.0 / B) * err;
  return {err.squaredNorm() / B, q.backward(tape, g).grads};
}

/// One Adam step on each critic. Nothing is changed when either loss or
/// gradient is non-finite.
inline CriticLoss critic_update(CriticPair& c, const Matrix& obs, const Matrix& actions, const Vector& y) {
  const Matrix in = hcat(obs, actions);
  auto [l1, g1] = critic_loss(c.q1, in, y);
  auto [l2, g2] = critic_loss(c.q2, in, y);
  CriticLoss out{l1, l2, false};
  if (!std::isfinite(l1) || !std::isfinite(l2) || !nn::all_finite(g1) || !nn::all_finite(g2)) return out;
  nn::adam_step(c.q1, g1, c.opt1);
  nn::adam_step(c.q2, g2, c.opt2);
  out.applied = true;
  return out;
}

/// Joint actions with agent `agent`'s block replaced.
inline Matrix substitute(const Matrix& joint, std::size_t agent, const Matrix& own) {
  Matrix out = joint;
  out.middleCols(static_cast<Eigen::Index>(3 * agent), own.cols()) = own;
  return out;
}

/// Q(s, joint with own action) per row and dQ/d(own action).
inline std::pair<Vector, Matrix> critic_probe(const Mlp& critic, const Matrix& obs, const Matrix& joint_actions,
                                              std::size_t agent, const Matrix& own) {
  nn::GradientTape tape;
  const Matrix in = hcat(obs, substitute(joint_actions, agent, own));
  const Vector q = critic.forward_batch(in, tape).col(0);
  const Matrix dq = critic.backward(tape, Matrix::Ones(q.size(), 1)).input_grad;
  return {q, dq.middleCols(obs.cols() + static_cast<Eigen::Index>(3 * agent), own.cols())};
}

struct ActorLoss {
  double total = 0.0;
  double q = 0.0;
  double clone = 0.0;
};

/// loss = -mean Q1(s, pi(o)) + clone_weight * mean ||pi(o) - anchor||^2.
/// `anchor` may be empty when clone_weight is zero.
inline ActorLoss ddpg_actor_update(Mlp& actor, nn::AdamState& opt, const Mlp& critic, const Matrix& own_obs,
                                   const Matrix& joint_obs, const Matrix& joint_actions, std::size_t agent,
                                   const Matrix& anchor, double clone_weight) {
  nn::GradientTape tape;
  const Matrix a = actor.forward_batch(own_obs, tape);
  const double B = static_cast<double>(a.rows());
  auto [q, dq] = critic_probe(critic, joint_obs, joint_actions, agent, a);
  ActorLoss out;
  out.q = -q.mean();
  Matrix grad = (-1.0 / B) * dq;
  if (clone_weight != 0.0) {
    const Matrix diff = a - anchor;
    out.clone = diff.squaredNorm() / B;
    grad += (2.0 * clone_weight / B) * diff;
  }
  out.total = out.q + clone_weight * out.clone;
  nn::adam_step(actor, actor.backward(tape, grad).grads, opt);
  return out;
}

}  // namespace sdamarl::marl
