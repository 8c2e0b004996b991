#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdamarl/experience/quality.hpp"

namespace sdamarl::marl {

enum class Algo { SdaMarl, Maddpg, AblationNoDiffusion };

inline std::string to_string(Algo a) {
  switch (a) {
    case Algo::SdaMarl: return "sda_marl";
    case Algo::Maddpg: return "maddpg";
    case Algo::AblationNoDiffusion: return "ablation_no_diffusion";
  }
  return "?";
}

inline Algo parse_algo(const std::string& s) {
  if (s == "sda_marl") return Algo::SdaMarl;
  if (s == "maddpg") return Algo::Maddpg;
  if (s == "ablation_no_diffusion") return Algo::AblationNoDiffusion;
  throw std::invalid_argument("unknown algo '" + s + "' (expected sda_marl, maddpg, ablation_no_diffusion)");
}

struct NetworkConfig {
  std::vector<std::size_t> actor_hidden{256, 256};
  std::vector<std::size_t> critic_hidden{256, 256};
  std::vector<std::size_t> diffusion_hidden{256, 256};
};

struct TrainConfig {
  std::size_t episodes = 4000;
  std::size_t episode_length = 400;
  std::size_t batch = 256;
  std::size_t update_interval = 400;  // env steps between update cycles
  std::size_t warmup = 4000;          // buffer size before the first update
  std::size_t replay_capacity = 1000000;
  double tau = 1e-2;
  double gamma = 0.95;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double diffusion_lr = 1e-3;
  double explore_sigma = 0.1;

  // Diffusion side.
  bool harvest = true;
  bool diffusion_updates = true;
  double harvest_sigma = 0.1;
  std::size_t diffusion_steps = 20;
  double q_weight = 1.0;
  double clone_weight_start = 0.5;
  double clone_weight_end = 0.1;
  std::size_t n_candidates = 5;
  std::size_t ema_interval = 5;
  double ema_decay = 0.995;

  std::uint64_t seed = 0;
  NetworkConfig nets;
  experience::QualityParams quality;

  void validate() const {
    auto req = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(what);
    };
    req(episodes >= 1, "train.episodes must be >= 1");
    req(episode_length >= 1, "train.episode_length must be >= 1");
    req(batch >= 1, "train.batch must be >= 1");
    req(update_interval >= 1, "train.update_interval must be >= 1");
    req(warmup >= batch, "train.warmup must be >= train.batch");
    req(replay_capacity >= warmup, "train.replay_capacity must be >= train.warmup");
    req(tau >= 0.0 && tau <= 1.0, "train.tau must lie in [0, 1]");
    req(gamma >= 0.0 && gamma <= 1.0, "train.gamma must lie in [0, 1]");
    req(actor_lr > 0.0 && critic_lr > 0.0 && diffusion_lr > 0.0, "learning rates must be > 0");
    req(explore_sigma >= 0.0 && harvest_sigma >= 0.0, "exploration noise must be >= 0");
    req(diffusion_steps >= 1, "train.diffusion_steps must be >= 1");
    req(q_weight >= 0.0, "train.q_weight must be >= 0");
    req(clone_weight_start >= 0.0 && clone_weight_end >= 0.0, "clone weights must be >= 0");
    req(n_candidates >= 1, "train.n_candidates must be >= 1");
    req(ema_interval >= 1, "train.ema_interval must be >= 1");
    req(ema_decay >= 0.0 && ema_decay <= 1.0, "train.ema_decay must lie in [0, 1]");
    quality.validate();
  }

  /// Cloning weight for a given training episode: linear from start to end.
  double clone_weight(std::size_t episode) const {
    if (episodes <= 1) return clone_weight_start;
    const double f = static_cast<double>(episode) / static_cast<double>(episodes - 1);
    return clone_weight_start + f * (clone_weight_end - clone_weight_start);
  }
};

/// Plain centralized-critic DDPG: no harvesting, no cloning, a single
/// bootstrap candidate from the target actors, no diffusion agents.
inline TrainConfig baseline_config(TrainConfig c) {
  c.harvest = false;
  c.diffusion_updates = false;
  c.clone_weight_start = c.clone_weight_end = 0.0;
  c.n_candidates = 1;
  return c;
}

inline TrainConfig config_for(Algo algo, TrainConfig c) {
  switch (algo) {
    case Algo::SdaMarl: return c;
    case Algo::Maddpg: return baseline_config(c);
    case Algo::AblationNoDiffusion: {
      // Same reduction reached from the SDA-MARL settings one switch at a time.
      c.harvest = false;
      c.clone_weight_start = 0.0;
      c.clone_weight_end = 0.0;
      c.n_candidates = 1;
      c.diffusion_updates = false;
      return c;
    }
  }
  return c;
}

}  // namespace sdamarl::marl
