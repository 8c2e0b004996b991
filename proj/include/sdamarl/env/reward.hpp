#pragma once

#include <cmath>

#include "sdamarl/env/world.hpp"

namespace sdamarl::env {

/// Pursuit term: inside the margin the reward rises linearly toward the
/// boundary value -margin; outside it is -d.
inline double position_term(double d_target, const RewardParams& p) {
  if (d_target <= p.target_margin)
    return p.proximity_modulator * d_target - (p.proximity_modulator + 1.0) * p.target_margin;
  return -d_target;
}

/// Jumps by exactly `auv_margin` at the threshold. No neighbour (infinite
/// distance) contributes nothing.
inline double collision_term(double d_auv, const RewardParams& p) {
  if (std::isinf(d_auv)) return 0.0;
  if (d_auv < p.auv_margin) return d_auv - p.auv_margin;
  return -d_auv;
}

inline double landmark_term(double d_landmark, const RewardParams& p) {
  return d_landmark < p.landmark_margin ? -p.landmark_penalty : 0.0;
}

struct RewardTerms {
  double position = 0.0;
  double collision = 0.0;
  double landmark = 0.0;
  double total = 0.0;
};

inline RewardTerms reward_terms(const WorldState& w, std::size_t agent, const RewardParams& p) {
  const auto d = distances(w, agent);
  RewardTerms t;
  t.position = position_term(d.to_target, p);
  t.collision = collision_term(d.to_auv, p);
  t.landmark = landmark_term(d.to_landmark, p);
  t.total = p.position_weight * t.position + p.collision_weight * t.collision + p.landmark_weight * t.landmark;
  return t;
}

inline double reward(const WorldState& w, std::size_t agent, const RewardParams& p) {
  return reward_terms(w, agent, p).total;
}

}  // namespace sdamarl::env
