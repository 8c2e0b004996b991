#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "sdamarl/common/random.hpp"
#include "sdamarl/env/physics.hpp"
#include "sdamarl/env/reward.hpp"
#include "sdamarl/env/world.hpp"
#include "sdamarl/marl/assignment.hpp"

namespace sdamarl::env {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sonar-gated local view of one AUV:
///   [position, velocity,
///    targets (assigned first, then by index),
///    other AUVs (by index),
///    landmarks (by index)]
/// Relative positions of undetected entities are exactly zero.
inline Eigen::VectorXd observe(const WorldState& w, std::size_t agent, const SonarParams& sonar,
                               double world_scale_m) {
  const std::size_t n = 6 + 3 * (w.num_targets() + w.num_auvs() - 1 + w.obstacles.size());
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  const Vec3& p = w.auv_position.at(agent);
  obs.segment<3>(0) = p;
  obs.segment<3>(3) = w.auv_velocity.at(agent);

  Eigen::Index slot = 6;
  auto put = [&](const Vec3& other) {
    const Vec3 rel = other - p;
    if (sonar_detects(sonar, rel.norm() * world_scale_m)) obs.segment<3>(slot) = rel;
    slot += 3;
  };
  const std::size_t own = w.assignment.at(agent);
  put(w.target_position.at(own));
  for (std::size_t t = 0; t < w.num_targets(); ++t)
    if (t != own) put(w.target_position[t]);
  for (std::size_t j = 0; j < w.num_auvs(); ++j)
    if (j != agent) put(w.auv_position[j]);
  for (const auto& o : w.obstacles) put(o.position);
  return obs;
}

struct StepResult {
  std::vector<Eigen::VectorXd> observations;
  std::vector<double> rewards;
  bool done = false;
};

class Environment {
 public:
  explicit Environment(ScenarioConfig config) : config_(std::move(config)) { config_.validate(); }

  const ScenarioConfig& config() const { return config_; }
  const WorldState& state() const { return state_; }
  std::size_t num_agents() const { return config_.num_auvs; }
  std::size_t observation_dim() const { return config_.observation_dim(); }
  static constexpr std::size_t action_dim() { return 3; }

  /// Install an explicit world (tests, scripted scenarios).
  void set_state(WorldState w) {
    if (w.auv_flow.size() != w.auv_position.size()) {
      w.auv_flow.resize(w.auv_position.size());
      for (std::size_t i = 0; i < w.auv_position.size(); ++i)
        w.auv_flow[i] = current_velocity(config_.current, w.auv_position[i]) - w.auv_velocity[i];
    }
    state_ = std::move(w);
  }

  /// Targets spawn uniformly in a central box with random headings; AUVs
  /// sit evenly spaced on a horizontal ring around the target centroid.
  const WorldState& reset(std::uint64_t seed) {
    Rng rng = make_rng(seed, streams::kEnvReset);
    WorldState w;
    const double e = config_.target_spawn_extent;
    for (std::size_t t = 0; t < config_.num_targets; ++t) {
      Vec3 pos(uniform(rng, -e, e), uniform(rng, -e, e), uniform(rng, -e, e));
      Vec3 dir(standard_normal(rng), standard_normal(rng), standard_normal(rng));
      if (dir.norm() == 0.0) dir = Vec3::UnitX();
      w.target_position.push_back(pos);
      w.target_velocity.push_back(config_.target_speed * dir.normalized());
    }
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : w.target_position) centroid += p;
    centroid /= static_cast<double>(config_.num_targets);

    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double n = static_cast<double>(config_.num_auvs);
    for (std::size_t i = 0; i < config_.num_auvs; ++i) {
      const double ang = phase + 2.0 * std::numbers::pi * static_cast<double>(i) / n;
      Vec3 p = centroid + config_.ring_radius * Vec3(std::cos(ang), std::sin(ang), 0.0);
      w.auv_position.push_back(clamp_to_world(p));
      w.auv_velocity.push_back(Vec3::Zero());
    }
    w.obstacles = config_.obstacles;
    w.assignment = marl::assign_targets(w.auv_position, w.target_position);
    w.step = 0;
    set_state(std::move(w));
    return state_;
  }

  std::vector<Eigen::VectorXd> observe_all() const {
    std::vector<Eigen::VectorXd> out;
    out.reserve(num_agents());
    for (std::size_t i = 0; i < num_agents(); ++i) out.push_back(observe(state_, i, config_.sonar, config_.world_scale_m));
    return out;
  }

  /// Net force on one AUV for the given (clamped) action.
  Vec3 net_force(std::size_t i, const Vec3& action) const {
    const auto& f = config_.fluid;
    const Vec3& p = state_.auv_position[i];
    const Vec3 flow = current_velocity(config_.current, p);
    const Vec3 rel_velocity = state_.auv_velocity[i] - flow;
    const Vec3 flow_seen = -rel_velocity;
    const Vec3 flow_accel = (flow_seen - state_.auv_flow[i]) / f.dt;

    Vec3 force = config_.max_thrust * action;
    force += hydro_force(f, rel_velocity, flow_accel);

    const double r = config_.collision.auv_radius;
    for (std::size_t j = 0; j < state_.num_auvs(); ++j) {
      if (j == i || state_.auv_position[j] == p) continue;  // coincident pairs have no defined direction
      force += collision_force(p, state_.auv_position[j], r, r, config_.collision);
    }
    for (const auto& o : state_.obstacles)
      if (o.position != p) force += collision_force(p, o.position, r, o.radius, config_.collision);

    // Drift force under which a damped body settles at the local current.
    if (f.damping > 0.0 && f.damping < 1.0)
      force += config_.auv_mass * f.damping / (f.dt * (1.0 - f.damping)) * flow;
    return force;
  }

  StepResult step(const std::vector<Vec3>& actions) {
    if (actions.size() != num_agents()) throw std::invalid_argument("step: one action per AUV required");
    const auto& f = config_.fluid;
    const std::size_t n = num_agents();

    std::vector<Vec3> forces(n);
    for (std::size_t i = 0; i < n; ++i) forces[i] = net_force(i, actions[i].cwiseMax(-1.0).cwiseMin(1.0));

    for (std::size_t i = 0; i < n; ++i) {
      Vec3& v = state_.auv_velocity[i];
      Vec3& p = state_.auv_position[i];
      const Vec3 flow = current_velocity(config_.current, p);
      state_.auv_flow[i] = flow - v;
      v = (v + f.dt * forces[i] / config_.auv_mass) * (1.0 - f.damping);
      p = clamp_to_world(p + f.dt * v);
    }
    for (std::size_t t = 0; t < state_.num_targets(); ++t) {
      Vec3& p = state_.target_position[t];
      Vec3& v = state_.target_velocity[t];
      p += f.dt * v;
      for (int k = 0; k < 3; ++k) {
        if (p[k] > 1.0) {
          p[k] = 2.0 - p[k];
          v[k] = -v[k];
        } else if (p[k] < -1.0) {
          p[k] = -2.0 - p[k];
          v[k] = -v[k];
        }
      }
    }
    ++state_.step;
    check_finite();

    StepResult out;
    out.observations = observe_all();
    out.rewards.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.rewards.push_back(reward(state_, i, config_.reward));
    out.done = state_.step >= config_.episode_length;
    return out;
  }

 private:
  void check_finite() const {
    auto bad = [](const std::vector<Vec3>& vs) {
      for (std::size_t i = 0; i < vs.size(); ++i)
        if (!vs[i].allFinite()) return static_cast<long>(i);
      return -1L;
    };
    std::ostringstream msg;
    if (long i = bad(state_.auv_position); i >= 0) msg << "AUV " << i << " position";
    else if (long i = bad(state_.auv_velocity); i >= 0) msg << "AUV " << i << " velocity";
    else if (long i = bad(state_.target_position); i >= 0) msg << "target " << i << " position";
    else return;
    throw SimulationError("non-finite state at step " + std::to_string(state_.step) + ": " + msg.str() +
                          "; episode aborted");
  }

  ScenarioConfig config_;
  WorldState state_;
};

}  // namespace sdamarl::env
