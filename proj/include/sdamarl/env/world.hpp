#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdamarl/env/params.hpp"
#include "sdamarl/env/physics.hpp"

namespace sdamarl::env {

/// Thrust whose damped terminal speed crosses the world edge (2 units) in
/// one episode.
inline double crossing_thrust(std::size_t episode_length, const FluidParams& f, double mass) {
  const double speed = 2.0 / (static_cast<double>(episode_length) * f.dt);
  if (f.damping <= 0.0 || f.damping >= 1.0) return mass * speed / f.dt;
  return mass * speed * f.damping / (f.dt * (1.0 - f.damping));
}

struct ScenarioConfig {
  std::string name = "custom";
  std::size_t num_auvs = 2;
  std::size_t num_targets = 1;
  std::vector<Obstacle> obstacles;
  std::size_t episode_length = 400;
  double ring_radius = 0.8;          // 2 km at 2.5 km per unit
  double target_spawn_extent = 0.2;  // targets spawn in [-e, e]^3
  double target_speed = 0.0125;
  double auv_mass = 1.0;
  double max_thrust = crossing_thrust(400, FluidParams{}, 1.0);
  double world_scale_m = 2500.0;     // metres per normalized unit
  FluidParams fluid;
  SonarParams sonar;
  CollisionParams collision;
  RewardParams reward;
  CurrentParams current;

  void validate() const {
    require(num_auvs >= 1 && num_auvs <= 8, "num_auvs must lie in [1, 8]");
    require(num_targets >= 1 && num_targets <= 3, "num_targets must lie in [1, 3]");
    require(num_targets <= num_auvs, "num_targets must not exceed num_auvs");
    require(episode_length >= 1, "episode_length must be >= 1");
    require(ring_radius > 0.0, "ring_radius must be > 0");
    require(target_spawn_extent >= 0.0 && target_spawn_extent <= 1.0, "target_spawn_extent must lie in [0, 1]");
    require(target_speed >= 0.0, "target_speed must be >= 0");
    require(auv_mass > 0.0, "auv_mass must be > 0");
    require(max_thrust > 0.0, "max_thrust must be > 0");
    require(world_scale_m > 0.0, "world_scale_m must be > 0");
    for (const auto& o : obstacles) {
      require(o.radius > 0.0, "obstacle radius must be > 0");
      require(o.position.allFinite(), "obstacle position must be finite");
    }
    fluid.validate();
    sonar.validate();
    collision.validate();
    reward.validate();
    current.validate();
  }

  std::size_t observation_dim() const { return 6 + 3 * (num_targets + (num_auvs - 1) + obstacles.size()); }
};

struct WorldState {
  std::vector<Vec3> auv_position;
  std::vector<Vec3> auv_velocity;
  std::vector<Vec3> auv_flow;  // flow velocity seen by each AUV at the previous step
  std::vector<Vec3> target_position;
  std::vector<Vec3> target_velocity;
  std::vector<Obstacle> obstacles;
  std::vector<std::size_t> assignment;  // AUV -> target index
  std::size_t step = 0;

  std::size_t num_auvs() const { return auv_position.size(); }
  std::size_t num_targets() const { return target_position.size(); }
};

inline Vec3 clamp_to_world(const Vec3& p) { return p.cwiseMax(-1.0).cwiseMin(1.0); }

struct Distances {
  double to_target = 0.0;
  double to_auv = std::numeric_limits<double>::infinity();
  double to_landmark = std::numeric_limits<double>::infinity();
};

inline Distances distances(const WorldState& w, std::size_t agent) {
  Distances d;
  const Vec3& p = w.auv_position.at(agent);
  d.to_target = (p - w.target_position.at(w.assignment.at(agent))).norm();
  for (std::size_t j = 0; j < w.num_auvs(); ++j)
    if (j != agent) d.to_auv = std::min(d.to_auv, (p - w.auv_position[j]).norm());
  for (const auto& o : w.obstacles) d.to_landmark = std::min(d.to_landmark, (p - o.position).norm());
  return d;
}

}  // namespace sdamarl::env
