#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "sdamarl/env/environment.hpp"
#include "sdamarl/env/trajectory.hpp"

using namespace sdamarl;
using namespace sdamarl::env;

namespace {

SonarParams zero_sonar() {
  SonarParams s;
  s.source_level = s.target_strength = s.noise_level = s.directivity_index = s.detection_threshold = 0.0;
  s.absorption_db_per_km = 0.0;
  return s;
}

// Quiet water: no current, no hydrodynamic loads, no damping.
ScenarioConfig still_water(std::size_t auvs, std::size_t targets) {
  ScenarioConfig c;
  c.num_auvs = auvs;
  c.num_targets = targets;
  c.fluid.drag_coeff = c.fluid.lift_coeff = c.fluid.virtual_mass_coeff = 0.0;
  c.fluid.damping = 0.0;
  c.current.uniform = Vec3::Zero();
  c.current.vortex_strength = 0.0;
  return c;
}

WorldState single_auv_world(const Vec3& auv, const Vec3& target) {
  WorldState w;
  w.auv_position = {auv};
  w.auv_velocity = {Vec3::Zero()};
  w.target_position = {target};
  w.target_velocity = {Vec3::Zero()};
  w.assignment = {0};
  return w;
}

}  // namespace

// --- sonar ---

TEST(Sonar, ZeroBudgetWithZeroLossGivesZeroMargin) {
  EXPECT_EQ(excess_margin_from_loss(zero_sonar(), 0.0), 0.0);
}

TEST(Sonar, HandBudget) {
  SonarParams s;
  s.source_level = 200;
  s.target_strength = 15;
  s.noise_level = 70;
  s.directivity_index = 10;
  s.detection_threshold = 10;
  EXPECT_DOUBLE_EQ(excess_margin_from_loss(s, 60.0), 25.0);
}

TEST(Sonar, DoublingRangeCostsSpreadingPlusAbsorption) {
  SonarParams s;
  for (double r : {10.0, 250.0, 1800.0, 4000.0}) {
    const double drop = sonar_excess_margin(s, r) - sonar_excess_margin(s, 2 * r);
    const double expected = 40.0 * std::log10(2.0) + 2.0 * s.absorption_db_per_km * r / 1000.0;
    EXPECT_NEAR(drop, expected, 1e-10);
    EXPECT_NEAR(40.0 * std::log10(2.0), 12.0412, 1e-4);
  }
}

TEST(Sonar, MarginIsAffineInBudgetTerms) {
  SonarParams s;
  const double base = sonar_excess_margin(s, 1234.0);
  SonarParams up = s;
  up.source_level += 1.0;
  EXPECT_NEAR(sonar_excess_margin(up, 1234.0) - base, 1.0, 1e-12);
  SonarParams noisy = s;
  noisy.noise_level += 1.0;
  EXPECT_NEAR(sonar_excess_margin(noisy, 1234.0) - base, -1.0, 1e-12);
}

TEST(Sonar, NonPositiveRangeRejected) {
  SonarParams s;
  EXPECT_THROW(sonar_excess_margin(s, 0.0), std::invalid_argument);
  EXPECT_THROW(sonar_excess_margin(s, -3.0), std::invalid_argument);
}

// --- hydrodynamics ---

TEST(Hydro, AtRestOnlyVirtualMassRemains) {
  FluidParams f;
  EXPECT_EQ(hydro_force(f, Vec3::Zero(), Vec3::Zero()), Vec3::Zero());
}

TEST(Hydro, DragMagnitude) {
  FluidParams f;
  f.drag_coeff = 0.5;
  f.frontal_area = 0.1;
  f.lift_coeff = 0.0;
  f.virtual_mass_coeff = 0.0;
  const Vec3 force = hydro_force(f, Vec3(2, 0, 0), Vec3::Zero());
  EXPECT_NEAR(force.norm(), 100.0, 1e-12);
  EXPECT_LT(force.x(), 0.0);  // opposes motion
}

TEST(Hydro, VirtualMassTerm) {
  FluidParams f;
  f.virtual_mass_coeff = 1.0;
  f.displaced_volume = 0.2;
  const Vec3 force = hydro_force(f, Vec3::Zero(), Vec3(0.5, 0, 0));
  EXPECT_NEAR((force - Vec3(100, 0, 0)).norm(), 0.0, 1e-12);
}

TEST(Hydro, LiftIsPerpendicularAndVanishesForVerticalMotion) {
  FluidParams f;
  f.drag_coeff = 0.0;
  f.virtual_mass_coeff = 0.0;
  const Vec3 u(1.0, 0.5, 0.3);
  const Vec3 lift = hydro_force(f, u, Vec3::Zero());
  EXPECT_NEAR(lift.dot(u), 0.0, 1e-12);
  EXPECT_NEAR(lift.norm(), 0.5 * f.density * u.squaredNorm() * f.lift_coeff * f.frontal_area, 1e-12);
  EXPECT_EQ(hydro_force(f, Vec3(0, 0, 2), Vec3::Zero()), Vec3::Zero());
}

// --- collision ---

TEST(Collision, TouchingGivesLn2) {
  CollisionParams c{0.01, 7.0, 0.3};
  EXPECT_NEAR(penetration_depth(0.6, 0.3, 0.3, 0.01), 0.01 * std::log(2.0), 1e-12);
  const Vec3 f = collision_force(Vec3(0.6, 0, 0), Vec3::Zero(), 0.3, 0.3, c);
  EXPECT_NEAR(f.norm(), 7.0 * 0.01 * std::log(2.0), 1e-12);
}

TEST(Collision, HandEvaluation) {
  CollisionParams c{0.5, 10.0, 1.0};
  const double sigma = penetration_depth(1.5, 1.0, 1.0, 0.5);
  EXPECT_NEAR(sigma, 0.5 * std::log1p(std::exp(1.0)), 1e-14);
  EXPECT_NEAR(sigma, 0.65663, 1e-5);
  EXPECT_NEAR(collision_force(Vec3(1.5, 0, 0), Vec3::Zero(), 1.0, 1.0, c).norm(), 6.5663, 1e-4);
}

TEST(Collision, VanishingTail) {
  const double k = 0.004;
  CollisionParams c{k, 3.0, 0.02};
  const double d = 0.04 + 20 * k;
  const Vec3 f = collision_force(Vec3(0, d, 0), Vec3::Zero(), 0.02, 0.02, c);
  EXPECT_LT(f.norm(), 3.0 * k * std::exp(-20.0));
  EXPECT_GT(f.y(), 0.0);
  EXPECT_LT(penetration_depth(1e3, 0.02, 0.02, k), 1e-300);
}

TEST(Collision, DepthStrictlyDecreasing) {
  double prev = penetration_depth(0.0, 0.1, 0.1, 0.05);
  for (int i = 1; i <= 200; ++i) {
    const double cur = penetration_depth(0.005 * i, 0.1, 0.1, 0.05);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(Collision, PairwiseAntisymmetric) {
  Rng rng = make_rng(5, 0);
  CollisionParams c{0.02, 4.0, 0.05};
  for (int i = 0; i < 100; ++i) {
    const Vec3 a(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const Vec3 b(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const Vec3 sum = collision_force(a, b, 0.05, 0.07, c) + collision_force(b, a, 0.07, 0.05, c);
    EXPECT_LT(sum.norm(), 1e-15);
  }
}

TEST(Collision, CoincidentRejected) {
  EXPECT_THROW(collision_force(Vec3::Ones(), Vec3::Ones(), 0.1, 0.1, CollisionParams{}), std::invalid_argument);
}

// --- reward ---

TEST(Reward, PositionTermContinuousAtMargin) {
  RewardParams p;
  for (double w : {1.5, 2.0, 7.0}) {
    p.proximity_modulator = w;
    const double d = p.target_margin;
    const double inner = w * d - (w + 1) * d;
    EXPECT_LT(std::abs(inner - (-d)), 1e-12);
    EXPECT_NEAR(position_term(d, p), -d, 1e-12);
    EXPECT_NEAR(position_term(std::nextafter(d, 1.0), p), -d, 1e-12);
  }
}

TEST(Reward, InsideMargin) {
  RewardParams p;
  p.proximity_modulator = 2.0;
  p.target_margin = 0.1;
  p.collision_weight = 0.0;
  p.landmark_weight = 0.0;
  WorldState w = single_auv_world(Vec3::Zero(), Vec3(0.05, 0, 0));
  EXPECT_NEAR(reward(w, 0, p), -0.2, 1e-12);
}

TEST(Reward, CollisionTermJumpsByMargin) {
  RewardParams p;
  const double d = p.auv_margin;
  const double left = collision_term(std::nextafter(d, 0.0), p);
  const double right = collision_term(d, p);
  EXPECT_NEAR(left, 0.0, 1e-15);
  EXPECT_LE(left, 0.0);
  EXPECT_DOUBLE_EQ(right, -d);
  EXPECT_NEAR(left - right, d, 1e-15);
  EXPECT_EQ(collision_term(std::numeric_limits<double>::infinity(), p), 0.0);
}

TEST(Reward, LandmarkPenaltyIsBinary) {
  RewardParams p;
  p.position_weight = 0.0;
  p.collision_weight = 0.0;
  p.landmark_weight = 1.0;
  p.landmark_penalty = 5.0;
  WorldState w = single_auv_world(Vec3::Zero(), Vec3(0.5, 0, 0));
  w.obstacles = {Obstacle{Vec3(p.landmark_margin - 1e-9, 0, 0), 0.01}};
  EXPECT_DOUBLE_EQ(reward(w, 0, p), -5.0);
  w.obstacles[0].position = Vec3(p.landmark_margin, 0, 0);
  EXPECT_DOUBLE_EQ(reward(w, 0, p), 0.0);
}

TEST(Reward, SingleAuvHasNoCollisionTerm) {
  RewardParams p;
  WorldState w = single_auv_world(Vec3::Zero(), Vec3(0.5, 0, 0));
  EXPECT_EQ(reward_terms(w, 0, p).collision, 0.0);
}

// --- observation ---

TEST(Observe, LengthAndLayout) {
  ScenarioConfig c;
  c.num_auvs = 2;
  c.num_targets = 1;
  c.obstacles = {Obstacle{Vec3(0.3, 0.3, 0), 0.05}, Obstacle{Vec3(-0.3, 0.3, 0), 0.05}};
  EXPECT_EQ(c.observation_dim(), 18u);

  WorldState w;
  w.auv_position = {Vec3::Zero(), Vec3(0, 0.2, 0)};
  w.auv_velocity = {Vec3(0.01, 0.02, 0.03), Vec3::Zero()};
  w.target_position = {Vec3(0.1, 0, 0)};
  w.target_velocity = {Vec3::Zero()};
  w.obstacles = c.obstacles;
  w.assignment = {0, 0};
  const auto o = observe(w, 0, c.sonar, c.world_scale_m);
  ASSERT_EQ(o.size(), 18);
  EXPECT_EQ(o.segment<3>(3), Vec3(0.01, 0.02, 0.03));
  EXPECT_EQ(o.segment<3>(6), Vec3(0.1, 0, 0));
  EXPECT_EQ(o.segment<3>(9), Vec3(0, 0.2, 0));
  EXPECT_EQ(o.segment<3>(12), Vec3(0.3, 0.3, 0));
}

TEST(Observe, UndetectedSlotsAreExactlyZero) {
  ScenarioConfig c;
  c.sonar.source_level = 120.0;  // detection range ~ 0.13 m
  WorldState w = single_auv_world(Vec3(0.1, 0.2, 0.3), Vec3(-0.4, 0.1, 0.0));
  const auto o = observe(w, 0, c.sonar, c.world_scale_m);
  EXPECT_EQ(o.segment<3>(6), Vec3::Zero());
  EXPECT_EQ(o.segment<3>(0), Vec3(0.1, 0.2, 0.3));
}

TEST(Observe, AssignedTargetComesFirst) {
  WorldState w;
  w.auv_position = {Vec3::Zero(), Vec3(0.5, 0, 0)};
  w.auv_velocity = {Vec3::Zero(), Vec3::Zero()};
  w.target_position = {Vec3(0.1, 0, 0), Vec3(0, 0.2, 0)};
  w.target_velocity = {Vec3::Zero(), Vec3::Zero()};
  w.assignment = {1, 0};
  SonarParams s;
  const auto o = observe(w, 0, s, 2500.0);
  EXPECT_EQ(o.segment<3>(6), Vec3(0, 0.2, 0));
  EXPECT_EQ(o.segment<3>(9), Vec3(0.1, 0, 0));
}

// --- step ---

TEST(Step, NoForcesNoMotion) {
  ScenarioConfig c = still_water(2, 1);
  Environment env(c);
  env.reset(3);
  const auto before = env.state().auv_position;
  env.step({Vec3::Zero(), Vec3::Zero()});
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(env.state().auv_position[i], before[i]);
}

TEST(Step, FullDampingZeroesVelocity) {
  ScenarioConfig c;
  c.fluid.damping = 1.0;
  Environment env(c);
  env.reset(1);
  for (int k = 0; k < 5; ++k) {
    env.step({Vec3(1, -1, 0.5), Vec3(-0.3, 1, 1)});
    for (const auto& v : env.state().auv_velocity) EXPECT_EQ(v, Vec3::Zero());
  }
}

TEST(Step, HandEulerStep) {
  ScenarioConfig c = still_water(1, 1);
  c.max_thrust = 1.0;
  c.auv_mass = 1.0;
  c.fluid.dt = 0.1;
  Environment env(c);
  env.set_state(single_auv_world(Vec3(0.2, 0, 0), Vec3(0.9, 0.9, 0.9)));
  env.step({Vec3(1, 0, 0)});
  EXPECT_NEAR((env.state().auv_velocity[0] - Vec3(0.1, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR(env.state().auv_position[0].x(), 0.21, 1e-15);
}

TEST(Step, ActionsAreClamped) {
  ScenarioConfig c = still_water(1, 1);
  Environment a(c), b(c);
  const auto w = single_auv_world(Vec3::Zero(), Vec3(0.9, 0.9, 0.9));
  a.set_state(w);
  b.set_state(w);
  a.step({Vec3(5, -7, 0.5)});
  b.step({Vec3(1, -1, 0.5)});
  EXPECT_EQ(a.state().auv_position[0], b.state().auv_position[0]);
}

TEST(Step, DampedBodyDriftsWithUniformCurrent) {
  ScenarioConfig c = still_water(1, 1);
  c.fluid.damping = 0.25;
  c.current.uniform = Vec3(0.01, 0, 0);
  Environment env(c);
  env.set_state(single_auv_world(Vec3::Zero(), Vec3(0.9, 0.9, 0.9)));
  for (int k = 0; k < 200; ++k) env.step({Vec3::Zero()});
  EXPECT_NEAR((env.state().auv_velocity[0] - c.current.uniform).norm(), 0.0, 1e-12);
}

TEST(Step, DoneAtEpisodeLength) {
  ScenarioConfig c;
  c.episode_length = 7;
  Environment env(c);
  env.reset(2);
  for (int k = 1; k <= 7; ++k) {
    const auto r = env.step({Vec3::Zero(), Vec3::Zero()});
    EXPECT_EQ(r.done, k == 7);
    EXPECT_EQ(r.observations.size(), 2u);
    EXPECT_EQ(r.rewards.size(), 2u);
  }
  EXPECT_EQ(env.state().step, 7u);
}

TEST(Step, NanStateAborts) {
  ScenarioConfig c;
  Environment env(c);
  env.reset(0);
  WorldState w = env.state();
  w.auv_velocity[1] = Vec3(std::nan(""), 0, 0);
  env.set_state(w);
  try {
    env.step({Vec3::Zero(), Vec3::Zero()});
    FAIL() << "expected SimulationError";
  } catch (const SimulationError& e) {
    EXPECT_NE(std::string(e.what()).find("AUV 1"), std::string::npos);
  }
}

TEST(Step, DeterministicAndBitwiseReproducible) {
  ScenarioConfig c;
  c.num_auvs = 4;
  c.num_targets = 2;
  c.obstacles = {Obstacle{Vec3(0.2, -0.1, 0), 0.05}};
  Environment a(c), b(c);
  a.reset(77);
  b.reset(77);
  Rng rng = make_rng(77, 100);
  for (int k = 0; k < 100; ++k) {
    std::vector<Vec3> act;
    for (int i = 0; i < 4; ++i) act.emplace_back(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const auto ra = a.step(act);
    const auto rb = b.step(act);
    EXPECT_EQ(ra.rewards, rb.rewards);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a.state().auv_position[i], b.state().auv_position[i]);
    EXPECT_EQ(a.state().auv_velocity[i], b.state().auv_velocity[i]);
  }
}

TEST(Step, PositionsStayInsideWorld) {
  ScenarioConfig c;
  c.num_auvs = 3;
  c.num_targets = 1;
  c.max_thrust = 5.0;  // strong enough to hit the walls often
  c.episode_length = 100000;
  Environment env(c);
  env.reset(11);
  Rng rng = make_rng(11, 101);
  for (int k = 0; k < 100000; ++k) {
    std::vector<Vec3> act;
    for (int i = 0; i < 3; ++i) act.emplace_back(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    env.step(act);
    for (const auto& p : env.state().auv_position) ASSERT_LE(p.cwiseAbs().maxCoeff(), 1.0);
    for (const auto& p : env.state().target_position) ASSERT_LE(p.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Step, TargetsReflectPreservingSpeed) {
  ScenarioConfig c = still_water(1, 1);
  Environment env(c);
  WorldState w = single_auv_world(Vec3::Zero(), Vec3(0.995, 0, 0));
  w.target_velocity = {Vec3(0.1, 0.05, 0)};
  env.set_state(w);
  env.step({Vec3::Zero()});
  EXPECT_NEAR(env.state().target_position[0].x(), 0.995, 1e-12);
  EXPECT_EQ(env.state().target_velocity[0], Vec3(-0.1, 0.05, 0));
}

// --- reset ---

TEST(Reset, SameSeedSameWorld) {
  ScenarioConfig c;
  c.num_auvs = 6;
  c.num_targets = 2;
  Environment a(c), b(c);
  const auto& wa = a.reset(42);
  const auto& wb = b.reset(42);
  EXPECT_EQ(wa.auv_position, wb.auv_position);
  EXPECT_EQ(wa.target_position, wb.target_position);
  EXPECT_EQ(wa.target_velocity, wb.target_velocity);
  EXPECT_EQ(wa.assignment, wb.assignment);
  Environment d(c);
  EXPECT_NE(d.reset(43).target_position, wa.target_position);
}

TEST(Reset, RingGeometry) {
  for (std::size_t n : {2u, 4u, 6u, 8u}) {
    ScenarioConfig c;
    c.num_auvs = n;
    c.num_targets = 1;
    c.target_spawn_extent = 0.1;
    Environment env(c);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto& w = env.reset(seed);
      const Vec3 centroid = w.target_position[0];
      for (const auto& p : w.auv_position) {
        EXPECT_NEAR((p - centroid).norm(), c.ring_radius, 1e-9);
        EXPECT_EQ(p.z(), centroid.z());
      }
      if (n == 2) {
        const Vec3 a = w.auv_position[0] - centroid, b = w.auv_position[1] - centroid;
        EXPECT_NEAR(std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0)), std::numbers::pi, 1e-7);
      }
    }
  }
}

TEST(Reset, TargetsMoveAtConfiguredSpeed) {
  ScenarioConfig c;
  c.num_auvs = 4;
  c.num_targets = 3;
  Environment env(c);
  const auto& w = env.reset(9);
  for (const auto& v : w.target_velocity) EXPECT_NEAR(v.norm(), c.target_speed, 1e-15);
}

TEST(Reset, InvalidCountsRejected) {
  ScenarioConfig c;
  c.num_auvs = 9;
  EXPECT_THROW(Environment{c}, ConfigError);
  c.num_auvs = 2;
  c.num_targets = 3;
  EXPECT_THROW(Environment{c}, ConfigError);
  c.num_targets = 0;
  EXPECT_THROW(Environment{c}, ConfigError);
}

// --- assignment ---

TEST(Assignment, LoadsBalanced) {
  std::vector<Vec3> auvs;
  for (int i = 0; i < 8; ++i) auvs.emplace_back(0.1 * i, 0, 0);
  std::vector<Vec3> targets = {Vec3(0, 0, 0), Vec3(0.05, 0, 0), Vec3(0.1, 0, 0)};
  const auto a = marl::assign_targets(auvs, targets);
  std::vector<int> load(3, 0);
  for (auto t : a) ++load[t];
  std::sort(load.begin(), load.end());
  EXPECT_EQ(load, (std::vector<int>{2, 3, 3}));
}

TEST(Assignment, NearestFirst) {
  std::vector<Vec3> auvs = {Vec3(1, 0, 0), Vec3(-1, 0, 0)};
  std::vector<Vec3> targets = {Vec3(-0.9, 0, 0), Vec3(0.9, 0, 0)};
  EXPECT_EQ(marl::assign_targets(auvs, targets), (std::vector<std::size_t>{1, 0}));
}

// --- trajectory log ---

TEST(Trajectory, JsonlRoundTrip) {
  ScenarioConfig c;
  c.episode_length = 5;
  Environment env(c);
  EpisodeLog log;
  log.records.push_back(snapshot(env.reset(4), 0));
  bool done = false;
  while (!done) {
    auto r = env.step({Vec3(0.2, 0, 0), Vec3(0, 0.2, 0)});
    log.records.push_back(snapshot(env.state(), 0, r.rewards));
    done = r.done;
  }
  std::stringstream ss;
  log.write_jsonl(ss);
  log.write_jsonl(ss);
  const auto back = read_trajectories(ss, 5);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].records[3].auv_position, log.records[3].auv_position);
  EXPECT_EQ(back[0].records[5].rewards, log.records[5].rewards);
}

TEST(Trajectory, TruncatedEpisodeRejected) {
  EpisodeLog log;
  WorldState w = single_auv_world(Vec3::Zero(), Vec3::Ones() * 0.5);
  for (std::size_t k = 0; k < 3; ++k) {
    w.step = k;
    log.records.push_back(snapshot(w, 0));
  }
  std::stringstream ss;
  log.write_jsonl(ss);
  try {
    read_trajectories(ss, 5);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("2 steps"), std::string::npos);
  }
}
