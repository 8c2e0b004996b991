#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "sdamarl/common/random.hpp"
#include "sdamarl/env/environment.hpp"
#include "sdamarl/experience/quality.hpp"
#include "sdamarl/experience/replay.hpp"

namespace sdamarl::experience {

/// Deterministic joint policy: one observation per agent in, one action
/// per agent out.
using JointPolicy = std::function<std::vector<env::Vec3>(const std::vector<Eigen::VectorXd>&)>;

inline Eigen::VectorXd concat(const std::vector<Eigen::VectorXd>& parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Eigen::VectorXd out(n);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

inline Eigen::VectorXd concat(const std::vector<env::Vec3>& parts) {
  Eigen::VectorXd out(3 * static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) out.segment<3>(3 * static_cast<Eigen::Index>(i)) = parts[i];
  return out;
}

struct HarvestStats {
  std::size_t steps = 0;
  std::size_t stored = 0;
  std::size_t valid_labels = 0;  // summed over agents and steps
};

/// Rolls the policy (plus Gaussian exploration) for up to `horizon` steps
/// from the environment's current state and stores every joint step in
/// which enough agents made a good pursuit move. Labels compare each AUV's
/// motion with its assigned target's position after the step.
inline HarvestStats harvest_episode(env::Environment& env, const JointPolicy& policy, const QualityParams& q,
                                    ReplayBuffer& buffer, std::size_t horizon, double explore_sigma, Rng& rng) {
  HarvestStats stats;
  const std::size_t n = env.num_agents();
  std::vector<Eigen::VectorXd> obs = env.observe_all();
  for (std::size_t k = 0; k < horizon; ++k) {
    std::vector<env::Vec3> actions = policy(obs);
    for (auto& a : actions) {
      if (explore_sigma > 0.0)
        for (int c = 0; c < 3; ++c) a[c] += explore_sigma * standard_normal(rng);
      a = a.cwiseMax(-1.0).cwiseMin(1.0);
    }
    const std::vector<env::Vec3> before = env.state().auv_position;
    auto result = env.step(actions);
    const auto& w = env.state();

    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = assess_quality(before[i], w.auv_position[i], w.target_position[w.assignment[i]], q);
      stats.valid_labels += static_cast<std::size_t>(labels[i]);
    }
    if (passes_harvest_gate(labels, q)) {
      Transition t;
      t.obs = concat(obs);
      t.actions = concat(actions);
      t.rewards = Eigen::Map<const Eigen::VectorXd>(result.rewards.data(), static_cast<Eigen::Index>(n));
      t.next_obs = concat(result.observations);
      t.done = result.done;
      t.source = Source::Harvested;
      buffer.push(std::move(t));
      ++stats.stored;
    }
    ++stats.steps;
    obs = std::move(result.observations);
    if (result.done) break;
  }
  return stats;
}

}  // namespace sdamarl::experience
