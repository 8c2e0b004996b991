#pragma once

#include <array>
#include <chrono>
#include <cstdio>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdamarl/common/random.hpp"
#include "sdamarl/diffusion/policy.hpp"
#include "sdamarl/env/environment.hpp"
#include "sdamarl/env/trajectory.hpp"
#include "sdamarl/experience/harvest.hpp"
#include "sdamarl/experience/replay.hpp"
#include "sdamarl/harness/metrics.hpp"
#include "sdamarl/marl/config.hpp"
#include "sdamarl/marl/updates.hpp"
#include "sdamarl/nn/checkpoint.hpp"

namespace sdamarl::marl {

struct DdpgAgent {
  Mlp actor;
  Mlp actor_target;
  nn::AdamState actor_opt;
  CriticPair critics;
};

struct DiffusionAgent {
  diffusion::DiffusionPolicy policy;
  nn::AdamState opt;
  CriticPair critics;
  std::size_t updates = 0;
};

/// Per-episode training summary. Deliberately free of wall-clock values so
/// that equal seeds give byte-equal logs.
struct TrainRecord {
  std::size_t episode = 0;
  std::uint64_t seed = 0;
  std::string algo;
  harness::EpisodeMetrics metrics;
  std::size_t harvested = 0;
  std::size_t update_cycles = 0;
  std::size_t diffusion_updates = 0;
  std::size_t skipped_critic_updates = 0;
  double critic_loss_q1 = 0.0;
  double critic_loss_q2 = 0.0;
  double actor_loss = 0.0;
  double diffusion_bc_loss = 0.0;
  double diffusion_q_loss = 0.0;
  double diffusion_critic_loss = 0.0;
  double clone_weight = 0.0;
  std::size_t buffer_live = 0;
  std::size_t buffer_harvested = 0;
};

inline nlohmann::json to_json(const TrainRecord& r) {
  const auto& m = r.metrics;
  return {{"episode", r.episode},
          {"seed", r.seed},
          {"algo", r.algo},
          {"mean_reward", m.mean_return},
          {"mean_reward_per_agent", m.returns},
          {"accuracy", m.accuracy},
          {"velocity_diff_mean", m.velocity_diff_mean},
          {"velocity_diff_sd", m.velocity_diff_sd},
          {"path_length", m.path_length},
          {"path_length_mean", m.path_length_mean},
          {"path_length_sd", m.path_length_sd},
          {"harvested_count", r.harvested},
          {"update_cycles", r.update_cycles},
          {"diffusion_updates", r.diffusion_updates},
          {"skipped_critic_updates", r.skipped_critic_updates},
          {"critic_losses", {r.critic_loss_q1, r.critic_loss_q2}},
          {"actor_loss", r.actor_loss},
          {"diffusion_bc_loss", r.diffusion_bc_loss},
          {"diffusion_q_loss", r.diffusion_q_loss},
          {"diffusion_critic_loss", r.diffusion_critic_loss},
          {"clone_weight", r.clone_weight},
          {"buffer_sizes_by_source", {r.buffer_live, r.buffer_harvested}}};
}

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Matrix block(const Matrix& joint, std::size_t agent, std::size_t width) {
  return joint.middleCols(static_cast<Eigen::Index>(agent * width), static_cast<Eigen::Index>(width));
}

/// Dual-decision trainer. With diffusion updates off it is plain
/// centralized-critic DDPG.
class Trainer {
 public:
  Trainer(env::ScenarioConfig scenario, TrainConfig cfg, std::string algo_name = "sda_marl")
      : cfg_(std::move(cfg)),
        algo_(std::move(algo_name)),
        env_((scenario.episode_length = cfg_.episode_length, scenario)),
        harvest_env_(scenario),
        n_(scenario.num_auvs),
        obs_dim_(scenario.observation_dim()),
        buffer_({n_, obs_dim_, 3}, cfg_.replay_capacity),
        reset_seeds_(make_rng(cfg_.seed, streams::kEnvReset)),
        harvest_seeds_(make_rng(cfg_.seed, streams::kHarvestReset)),
        explore_rng_(make_rng(cfg_.seed, streams::kExploration)),
        replay_rng_(make_rng(cfg_.seed, streams::kReplaySample)),
        diffusion_rng_(make_rng(cfg_.seed, streams::kDiffusionSample)),
        harvest_rng_(make_rng(cfg_.seed, streams::kHarvest)),
        choice_rng_(make_rng(cfg_.seed, streams::kCriticChoice)) {
    cfg_.validate();
    build_networks();
  }

  const TrainConfig& config() const { return cfg_; }
  const env::ScenarioConfig& scenario() const { return env_.config(); }
  const std::string& algo() const { return algo_; }
  std::size_t num_agents() const { return n_; }
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t episodes_done() const { return episode_; }
  bool finished() const { return episode_ >= cfg_.episodes; }
  std::size_t total_steps() const { return total_steps_; }
  std::size_t total_update_cycles() const { return cycles_; }
  double update_seconds() const { return update_seconds_; }
  const std::vector<DdpgAgent>& agents() const { return agents_; }
  const std::vector<DiffusionAgent>& diffusion_agents() const { return diffusion_; }
  const experience::ReplayBuffer& buffer() const { return buffer_; }
  const env::EpisodeLog& last_log() const { return log_; }

  /// Called after every update cycle with the running cycle count.
  std::function<void(const Trainer&, std::size_t)> on_update;

  std::vector<env::Vec3> act(const std::vector<Eigen::VectorXd>& obs) const {
    std::vector<env::Vec3> out;
    out.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) out.emplace_back(agents_[i].actor.forward(obs[i]));
    return out;
  }

  TrainRecord train_episode() {
    if (finished()) throw TrainingError("training already finished");
    TrainRecord rec;
    rec.episode = episode_;
    rec.seed = cfg_.seed;
    rec.algo = algo_;
    rec.clone_weight = cfg_.clone_weight(episode_);
    stats_ = {};

    if (cfg_.harvest) {
      harvest_env_.reset(harvest_seeds_());
      const auto policy = [this](const std::vector<Eigen::VectorXd>& o) { return act(o); };
      rec.harvested = experience::harvest_episode(harvest_env_, policy, cfg_.quality, buffer_, cfg_.episode_length,
                                                  cfg_.harvest_sigma, harvest_rng_)
                          .stored;
    }

    env_.reset(reset_seeds_());
    log_.records.clear();
    log_.records.push_back(env::snapshot(env_.state(), episode_));
    std::vector<Eigen::VectorXd> obs = env_.observe_all();
    for (std::size_t k = 0; k < cfg_.episode_length; ++k) {
      std::vector<env::Vec3> actions = act(obs);
      for (auto& a : actions) {
        for (int c = 0; c < 3; ++c) a[c] += cfg_.explore_sigma * standard_normal(explore_rng_);
        a = a.cwiseMax(-1.0).cwiseMin(1.0);
      }
      env::StepResult res = env_.step(actions);

      experience::Transition t;
      t.obs = experience::concat(obs);
      t.actions = experience::concat(actions);
      t.rewards = Eigen::Map<const Eigen::VectorXd>(res.rewards.data(), static_cast<Eigen::Index>(n_));
      t.next_obs = experience::concat(res.observations);
      t.done = res.done;
      t.source = experience::Source::Live;
      buffer_.push(std::move(t));
      ++total_steps_;

      if (buffer_.size() >= cfg_.warmup && total_steps_ % cfg_.update_interval == 0) update_cycle(rec.clone_weight);

      log_.records.push_back(env::snapshot(env_.state(), episode_, res.rewards));
      obs = std::move(res.observations);
      if (res.done) break;
    }

    rec.metrics = harness::compute_metrics(log_);
    rec.update_cycles = stats_.cycles;
    rec.diffusion_updates = stats_.diffusion_cycles;
    rec.skipped_critic_updates = stats_.skipped;
    if (stats_.cycles > 0) {
      const double c = static_cast<double>(stats_.cycles * n_);
      rec.critic_loss_q1 = stats_.q1 / c;
      rec.critic_loss_q2 = stats_.q2 / c;
      rec.actor_loss = stats_.actor / c;
    }
    if (stats_.diffusion_cycles > 0) {
      const double c = static_cast<double>(stats_.diffusion_cycles * n_);
      rec.diffusion_bc_loss = stats_.bc / c;
      rec.diffusion_q_loss = stats_.dq / c;
      rec.diffusion_critic_loss = stats_.dcritic / c;
    }
    rec.buffer_live = buffer_.count(experience::Source::Live);
    rec.buffer_harvested = buffer_.count(experience::Source::Harvested);
    ++episode_;
    return rec;
  }

  /// Writes every network as a separate checkpoint file.
  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::string s = std::to_string(i);
      nn::save_checkpoint(dir / ("actor_" + s + ".sdam"), agents_[i].actor);
      nn::save_checkpoint(dir / ("critic1_" + s + ".sdam"), agents_[i].critics.q1);
      nn::save_checkpoint(dir / ("critic2_" + s + ".sdam"), agents_[i].critics.q2);
      if (!diffusion_.empty()) {
        diffusion::save_policy(dir / ("diffusion_" + s + ".sdam"), diffusion_[i].policy);
        nn::save_checkpoint(dir / ("diffusion_critic1_" + s + ".sdam"), diffusion_[i].critics.q1);
        nn::save_checkpoint(dir / ("diffusion_critic2_" + s + ".sdam"), diffusion_[i].critics.q2);
      }
    }
  }

 private:
  struct CycleStats {
    std::size_t cycles = 0, diffusion_cycles = 0, skipped = 0;
    double q1 = 0, q2 = 0, actor = 0, bc = 0, dq = 0, dcritic = 0;
  };

  void build_networks() {
    const std::size_t joint_in = n_ * (obs_dim_ + 3);
    auto widths = [](std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
      std::vector<std::size_t> w{in};
      w.insert(w.end(), hidden.begin(), hidden.end());
      w.push_back(out);
      return w;
    };
    const nn::AdamConfig actor_opt{cfg_.actor_lr};
    const nn::AdamConfig critic_opt{cfg_.critic_lr};
    Rng actor_rng = make_rng(cfg_.seed, streams::kActorInit);
    Rng critic_rng = make_rng(cfg_.seed, streams::kCriticInit);
    for (std::size_t i = 0; i < n_; ++i) {
      DdpgAgent a;
      a.actor = Mlp::uniform_init(widths(obs_dim_, cfg_.nets.actor_hidden, 3), nn::Activation::Relu,
                                  nn::Activation::Tanh, actor_rng);
      a.actor_target = a.actor;
      a.actor_opt = nn::AdamState(a.actor, actor_opt);
      auto cw = widths(joint_in, cfg_.nets.critic_hidden, 1);
      Mlp q1 = Mlp::uniform_init(cw, nn::Activation::Relu, nn::Activation::Identity, critic_rng);
      Mlp q2 = Mlp::uniform_init(cw, nn::Activation::Relu, nn::Activation::Identity, critic_rng);
      a.critics = CriticPair(std::move(q1), std::move(q2), critic_opt);
      agents_.push_back(std::move(a));
    }
    if (!cfg_.diffusion_updates) return;
    Rng diff_rng = make_rng(cfg_.seed, streams::kDiffusionInit);
    Rng dcritic_rng = make_rng(cfg_.seed, streams::kDiffusionCriticInit);
    const auto sched = diffusion::default_schedule(cfg_.diffusion_steps);
    for (std::size_t i = 0; i < n_; ++i) {
      diffusion::DiffusionPolicy p(obs_dim_, 3, sched, cfg_.nets.diffusion_hidden, diff_rng);
      nn::AdamState opt(p.net(), nn::AdamConfig{cfg_.diffusion_lr});
      auto cw = widths(joint_in, cfg_.nets.critic_hidden, 1);
      Mlp q1 = Mlp::uniform_init(cw, nn::Activation::Relu, nn::Activation::Identity, dcritic_rng);
      Mlp q2 = Mlp::uniform_init(cw, nn::Activation::Relu, nn::Activation::Identity, dcritic_rng);
      diffusion_.push_back(DiffusionAgent{std::move(p), std::move(opt), CriticPair(std::move(q1), std::move(q2), critic_opt), 0});
    }
  }

  /// Joint next actions used inside the bootstrap max.
  std::vector<Matrix> candidates(const Matrix& next_obs) {
    const Eigen::Index B = next_obs.rows();
    std::vector<Matrix> out;
    if (!cfg_.diffusion_updates) {
      Matrix joint(B, static_cast<Eigen::Index>(3 * n_));
      for (std::size_t i = 0; i < n_; ++i)
        joint.middleCols(static_cast<Eigen::Index>(3 * i), 3) =
            agents_[i].actor_target.forward_batch(block(next_obs, i, obs_dim_));
      out.push_back(std::move(joint));
      return out;
    }
    for (std::size_t j = 0; j < cfg_.n_candidates; ++j) {
      Matrix joint(B, static_cast<Eigen::Index>(3 * n_));
      for (std::size_t i = 0; i < n_; ++i)
        joint.middleCols(static_cast<Eigen::Index>(3 * i), 3) =
            diffusion_[i].policy.sample_batch(block(next_obs, i, obs_dim_), diffusion_rng_, true);
      out.push_back(std::move(joint));
    }
    return out;
  }

  void update_cycle(double clone_weight) {
    const auto t0 = std::chrono::steady_clock::now();
    auto batch = buffer_.sample(cfg_.batch, experience::SourceFilter::Any, replay_rng_);
    if (!batch) throw TrainingError("update requested on an under-filled buffer");
    const auto cand = candidates(batch->next_obs);
    const bool clone = clone_weight > 0.0 && cfg_.diffusion_updates;

    for (std::size_t i = 0; i < n_; ++i) {
      auto& a = agents_[i];
      const Vector y = critic_target(batch->rewards.col(static_cast<Eigen::Index>(i)), batch->done, batch->next_obs,
                                     cand, a.critics.q1_target, a.critics.q2_target, cfg_.gamma);
      const auto cl = critic_update(a.critics, batch->obs, batch->actions, y);
      if (!cl.applied) {
        ++stats_.skipped;
        std::fprintf(stderr, "warning: non-finite critic loss for agent %zu, update skipped\n", i);
      }
      stats_.q1 += cl.q1;
      stats_.q2 += cl.q2;

      const Matrix own_obs = block(batch->obs, i, obs_dim_);
      Matrix anchor;
      if (clone) anchor = diffusion_[i].policy.sample_batch(own_obs, diffusion_rng_, true);
      const auto al = ddpg_actor_update(a.actor, a.actor_opt, a.critics.q1, own_obs, batch->obs, batch->actions, i,
                                        anchor, clone ? clone_weight : 0.0);
      stats_.actor += al.total;
    }

    if (cfg_.diffusion_updates) diffusion_cycle();

    for (auto& a : agents_) {
      nn::soft_update(a.actor_target, a.actor, cfg_.tau);
      a.critics.soft_update_targets(cfg_.tau);
    }
    ++stats_.cycles;
    ++cycles_;
    check_finite();
    update_seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_update) on_update(*this, cycles_);
  }

  void diffusion_cycle() {
    auto hb = buffer_.sample(cfg_.batch, experience::SourceFilter::OnlyHarvested, replay_rng_);
    if (!hb) return;
    const auto cand = candidates(hb->next_obs);
    for (std::size_t i = 0; i < n_; ++i) {
      auto& d = diffusion_[i];
      const Vector y = critic_target(hb->rewards.col(static_cast<Eigen::Index>(i)), hb->done, hb->next_obs, cand,
                                     d.critics.q1_target, d.critics.q2_target, cfg_.gamma);
      const auto cl = critic_update(d.critics, hb->obs, hb->actions, y);
      if (!cl.applied) ++stats_.skipped;
      stats_.dcritic += 0.5 * (cl.q1 + cl.q2);

      const Matrix own_obs = block(hb->obs, i, obs_dim_);
      const Matrix own_act = block(hb->actions, i, 3);
      std::array<diffusion::CriticProbe, 2> probes;
      for (std::size_t k = 0; k < 2; ++k) {
        const Mlp* q = &d.critics.online(k);
        probes[k] = [q, &hb, i](const Matrix& a) { return critic_probe(*q, hb->obs, hb->actions, i, a); };
      }
      const auto loss = diffusion::diffusion_actor_loss(d.policy.net(), d.policy.schedule(), own_obs, own_act,
                                                        cfg_.q_weight, probes, diffusion_rng_, choice_rng_);
      nn::adam_step(d.policy.mutable_net(), loss.grads, d.opt);
      stats_.bc += loss.bc;
      stats_.dq += loss.q;
      if (++d.updates % cfg_.ema_interval == 0) d.policy.update_ema(cfg_.ema_decay);
      d.critics.soft_update_targets(cfg_.tau);
    }
    ++stats_.diffusion_cycles;
  }

  void check_finite() const {
    auto bad = [](const Mlp& m) { return !nn::all_finite(m.params()); };
    for (std::size_t i = 0; i < n_; ++i) {
      const auto& a = agents_[i];
      if (bad(a.actor) || bad(a.critics.q1) || bad(a.critics.q2))
        throw TrainingError("non-finite parameters in agent " + std::to_string(i) + " after update cycle " +
                            std::to_string(cycles_));
      if (!diffusion_.empty() && bad(diffusion_[i].policy.net()))
        throw TrainingError("non-finite diffusion parameters in agent " + std::to_string(i));
    }
  }

  TrainConfig cfg_;
  std::string algo_;
  env::Environment env_;
  env::Environment harvest_env_;
  std::size_t n_;
  std::size_t obs_dim_;
  experience::ReplayBuffer buffer_;
  Rng reset_seeds_, harvest_seeds_, explore_rng_, replay_rng_, diffusion_rng_, harvest_rng_, choice_rng_;
  std::vector<DdpgAgent> agents_;
  std::vector<DiffusionAgent> diffusion_;
  env::EpisodeLog log_;
  CycleStats stats_;
  std::size_t episode_ = 0;
  std::size_t total_steps_ = 0;
  std::size_t cycles_ = 0;
  double update_seconds_ = 0.0;
};

/// Deterministic rollouts of frozen actors.
struct Evaluation {
  std::vector<harness::EpisodeMetrics> episodes;
  std::vector<env::EpisodeLog> logs;
};

inline Evaluation evaluate(const std::vector<Mlp>& actors, const env::ScenarioConfig& scenario, std::size_t episodes,
                           std::uint64_t seed, bool keep_logs = false) {
  env::Environment e(scenario);
  if (actors.size() != e.num_agents()) throw std::invalid_argument("evaluate: one actor per AUV required");
  Rng seeds = make_rng(seed, streams::kEvalReset);
  Evaluation out;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    env::EpisodeLog log;
    log.records.push_back(env::snapshot(e.reset(seeds()), ep));
    auto obs = e.observe_all();
    bool done = false;
    while (!done) {
      std::vector<env::Vec3> act;
      for (std::size_t i = 0; i < actors.size(); ++i) act.emplace_back(actors[i].forward(obs[i]));
      auto r = e.step(act);
      log.records.push_back(env::snapshot(e.state(), ep, r.rewards));
      obs = std::move(r.observations);
      done = r.done;
    }
    out.episodes.push_back(harness::compute_metrics(log));
    if (keep_logs) out.logs.push_back(std::move(log));
  }
  return out;
}

inline std::vector<Mlp> actors_of(const Trainer& t) {
  std::vector<Mlp> out;
  for (const auto& a : t.agents()) out.push_back(a.actor);
  return out;
}

}  // namespace sdamarl::marl
