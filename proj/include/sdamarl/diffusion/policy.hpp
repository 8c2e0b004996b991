#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "sdamarl/common/random.hpp"
#include "sdamarl/diffusion/schedule.hpp"
#include "sdamarl/nn/checkpoint.hpp"
#include "sdamarl/nn/mlp.hpp"

namespace sdamarl::diffusion {

using nn::Mlp;
using nn::ParamSet;

/// [state | noisy action | t / T]
inline Matrix denoiser_input(const Matrix& states, const Matrix& xt, std::size_t t, std::size_t T) {
  if (states.rows() != xt.rows()) throw nn::DimensionError("denoiser_input: batch sizes differ");
  Matrix in(states.rows(), states.cols() + xt.cols() + 1);
  in << states, xt, Matrix::Constant(states.rows(), 1, static_cast<double>(t) / static_cast<double>(T));
  return in;
}

/// Noise-predicting network with an exponential-moving-average twin.
class DiffusionPolicy {
 public:
  DiffusionPolicy(std::size_t state_dim, std::size_t action_dim, NoiseSchedule schedule,
                  const std::vector<std::size_t>& hidden, Rng& init_rng)
      : state_dim_(state_dim), action_dim_(action_dim), schedule_(std::move(schedule)) {
    std::vector<std::size_t> widths{state_dim + action_dim + 1};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(action_dim);
    net_ = Mlp::uniform_init(widths, nn::Activation::Relu, nn::Activation::Identity, init_rng);
    ema_ = net_;
  }

  DiffusionPolicy(Mlp net, Mlp ema, NoiseSchedule schedule, std::size_t state_dim, std::size_t action_dim)
      : state_dim_(state_dim), action_dim_(action_dim), schedule_(std::move(schedule)), net_(std::move(net)),
        ema_(std::move(ema)) {
    if (!net_.same_architecture(ema_)) throw nn::ArchitectureMismatch("EMA and online networks differ");
    if (net_.input_width() != state_dim + action_dim + 1 || net_.output_width() != action_dim)
      throw nn::DimensionError("denoiser widths do not match state/action dimensions");
  }

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const Mlp& net() const { return net_; }
  Mlp& mutable_net() { return net_; }
  const Mlp& ema() const { return ema_; }
  const Mlp& network(bool use_ema) const { return use_ema ? ema_ : net_; }

  void update_ema(double decay) { nn::ema_update(ema_, net_, decay); }

  /// Ancestral sampling from pure noise; one action row per state row.
  Matrix sample_batch(const Matrix& states, Rng& rng, bool use_ema) const {
    if (states.cols() != static_cast<Eigen::Index>(state_dim_))
      throw nn::DimensionError("sample: state width does not match the policy");
    const Mlp& net = network(use_ema);
    const std::size_t T = schedule_.steps();
    const auto d = static_cast<Eigen::Index>(action_dim_);
    Matrix x = gaussian_matrix(states.rows(), d, rng);
    for (std::size_t t = T; t >= 1; --t) {
      const Matrix eps_hat = net.forward_batch(denoiser_input(states, x, t, T));
      x = reverse_mean(schedule_, x, t, eps_hat);
      if (t > 1) x += schedule_.sigma(t) * gaussian_matrix(states.rows(), d, rng);
    }
    return x.cwiseMax(-1.0).cwiseMin(1.0);
  }

  Vector sample(const Vector& state, Rng& rng, bool use_ema) const {
    Matrix row = state.transpose();
    return sample_batch(row, rng, use_ema).row(0).transpose();
  }

 private:
  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
  NoiseSchedule schedule_;
  Mlp net_;
  Mlp ema_;
};

// ---------------------------------------------------------------------------
// Denoising objective

struct NoiseDraw {
  std::vector<std::size_t> t;  // per row, in 1..T
  Matrix eps;
};

inline NoiseDraw draw_noise(Eigen::Index batch, Eigen::Index action_dim, std::size_t T, Rng& rng) {
  NoiseDraw d;
  std::uniform_int_distribution<std::size_t> pick(1, T);
  d.t.reserve(static_cast<std::size_t>(batch));
  for (Eigen::Index b = 0; b < batch; ++b) d.t.push_back(pick(rng));
  d.eps = gaussian_matrix(batch, action_dim, rng);
  return d;
}

struct LossGrad {
  double loss = 0.0;
  ParamSet grads;
};

/// Batch mean of ||eps - eps_hat||^2 (summed over action dimensions).
inline LossGrad denoising_loss(const Mlp& net, const NoiseSchedule& s, const Matrix& states, const Matrix& actions,
                               const NoiseDraw& draw) {
  const Eigen::Index B = states.rows();
  if (B == 0) throw std::invalid_argument("denoising_loss: empty batch");
  if (actions.rows() != B || draw.eps.rows() != B || static_cast<Eigen::Index>(draw.t.size()) != B)
    throw nn::DimensionError("denoising_loss: batch sizes differ");

  const auto S = states.cols(), d = actions.cols();
  Matrix in(B, S + d + 1);
  for (Eigen::Index b = 0; b < B; ++b) {
    const std::size_t t = s.check(draw.t[static_cast<std::size_t>(b)]);
    const double ab = s.alpha_bar(t);
    in.row(b) << states.row(b), std::sqrt(ab) * actions.row(b) + std::sqrt(1.0 - ab) * draw.eps.row(b),
        static_cast<double>(t) / static_cast<double>(s.steps());
  }
  nn::GradientTape tape;
  const Matrix diff = net.forward_batch(in, tape) - draw.eps;
  LossGrad out;
  out.loss = diff.squaredNorm() / static_cast<double>(B);
  out.grads = net.backward(tape, (2.0 / static_cast<double>(B)) * diff).grads;
  return out;
}

inline LossGrad denoising_loss(const Mlp& net, const NoiseSchedule& s, const Matrix& states, const Matrix& actions,
                               Rng& rng) {
  return denoising_loss(net, s, states, actions, draw_noise(states.rows(), actions.cols(), s.steps(), rng));
}

// ---------------------------------------------------------------------------
// Differentiable sampling

/// One reverse chain with its per-step tapes. The injected noise is fixed
/// once drawn, so the final action is a deterministic function of the
/// network parameters.
struct Rollout {
  Matrix states;
  Matrix raw_action;                  // before clamping
  Matrix action;                      // clamped to [-1, 1]
  std::vector<nn::GradientTape> tapes;  // tapes[t] for step t, 1..T
};

inline Rollout sample_with_tape(const Mlp& net, const NoiseSchedule& s, const Matrix& states, Rng& rng) {
  const std::size_t T = s.steps();
  const auto d = static_cast<Eigen::Index>(net.output_width());
  Rollout r;
  r.states = states;
  r.tapes.resize(T + 1);
  Matrix x = gaussian_matrix(states.rows(), d, rng);
  for (std::size_t t = T; t >= 1; --t) {
    const Matrix eps_hat = net.forward_batch(denoiser_input(states, x, t, T), r.tapes[t]);
    x = reverse_mean(s, x, t, eps_hat);
    if (t > 1) x += s.sigma(t) * gaussian_matrix(states.rows(), d, rng);
  }
  r.raw_action = x;
  r.action = x.cwiseMax(-1.0).cwiseMin(1.0);
  return r;
}

/// Parameter gradient of sum(action_grad .* action) through the whole chain.
inline ParamSet rollout_backward(const Mlp& net, const NoiseSchedule& s, const Rollout& r, const Matrix& action_grad) {
  const std::size_t T = s.steps();
  const auto S = r.states.cols();
  const auto d = static_cast<Eigen::Index>(net.output_width());
  Matrix dx = (r.raw_action.array().abs() <= 1.0).select(action_grad, 0.0);
  ParamSet grads = nn::zeros_like(net.params());
  for (std::size_t t = 1; t <= T; ++t) {
    // x_{t-1} = c1 * (x_t - c2 * eps_hat(x_t)) + noise
    const double c1 = 1.0 / std::sqrt(s.alpha(t));
    const double c2 = s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t));
    const auto bp = net.backward(r.tapes[t], -c1 * c2 * dx);
    nn::axpy(1.0, bp.grads, grads);
    dx = c1 * dx + bp.input_grad.middleCols(S, d);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Combined actor objective

/// Returns Q(s, a) per row and dQ/da for a batch of candidate actions. The
/// critic's own parameters are not touched.
using CriticProbe = std::function<std::pair<Vector, Matrix>(const Matrix& actions)>;

struct ActorLoss {
  double total = 0.0;
  double bc = 0.0;
  double q = 0.0;
  std::size_t critic = 0;
  ParamSet grads;
};

/// L = L_BC + q_weight * L_Q, with L_Q = -mean Q_i(s, pi(s)) and i drawn
/// uniformly from the two critics each call.
inline ActorLoss diffusion_actor_loss(const Mlp& net, const NoiseSchedule& s, const Matrix& states,
                                      const Matrix& actions, double q_weight, const std::array<CriticProbe, 2>& critics,
                                      Rng& noise_rng, Rng& choice_rng) {
  if (q_weight < 0.0) throw std::invalid_argument("diffusion_actor_loss: q_weight must be >= 0");
  ActorLoss out;
  out.critic = std::uniform_int_distribution<std::size_t>(0, 1)(choice_rng);
  auto bc = denoising_loss(net, s, states, actions, noise_rng);
  out.bc = bc.loss;
  out.grads = std::move(bc.grads);
  out.total = out.bc;
  if (q_weight == 0.0) return out;

  const Rollout r = sample_with_tape(net, s, states, noise_rng);
  const auto [q, dq] = critics[out.critic](r.action);
  const double B = static_cast<double>(states.rows());
  out.q = -q.mean();
  out.total += q_weight * out.q;
  nn::axpy(1.0, rollout_backward(net, s, r, (-q_weight / B) * dq), out.grads);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: SDAM header, a DIFF section, online then EMA parameters.

inline constexpr std::array<char, 4> kDiffusionTag{'D', 'I', 'F', 'F'};

inline void write_policy(std::ostream& os, const DiffusionPolicy& p) {
  nn::write_header(os, p.net().widths());
  nn::io::write_tag(os, kDiffusionTag);
  nn::io::write_u32(os, static_cast<std::uint32_t>(p.schedule().steps()));
  nn::io::write_f64(os, p.schedule().beta_min());
  nn::io::write_f64(os, p.schedule().beta_max());
  nn::io::write_u32(os, static_cast<std::uint32_t>(p.action_dim()));
  nn::write_params(os, p.net().params());
  nn::write_params(os, p.ema().params());
  if (!os) throw nn::CheckpointError("failed writing diffusion checkpoint");
}

inline DiffusionPolicy read_policy(std::istream& is) {
  const auto widths = nn::read_header(is);
  nn::io::expect_tag(is, kDiffusionTag);
  const std::size_t T = nn::io::read_u32(is);
  const double bmin = nn::io::read_f64(is);
  const double bmax = nn::io::read_f64(is);
  const std::size_t d = nn::io::read_u32(is);
  if (widths.back() != d || widths.front() < d + 1)
    throw nn::CheckpointError("diffusion checkpoint: widths inconsistent with action dimension");
  Mlp net(widths, nn::Activation::Relu, nn::Activation::Identity);
  Mlp ema = net;
  ParamSet p = net.params();
  nn::read_params(is, p);
  net.set_params(p);
  nn::read_params(is, p);
  ema.set_params(std::move(p));
  return DiffusionPolicy(std::move(net), std::move(ema), make_schedule(T, bmin, bmax), widths.front() - d - 1, d);
}

inline void save_policy(const std::filesystem::path& path, const DiffusionPolicy& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw nn::CheckpointError("cannot open " + path.string() + " for writing");
  write_policy(os, p);
}

inline DiffusionPolicy load_policy(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw nn::CheckpointError("cannot open " + path.string());
  return read_policy(is);
}

}  // namespace sdamarl::diffusion
