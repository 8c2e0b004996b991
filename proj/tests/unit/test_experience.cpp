#include <cmath>
#include <numbers>
#include <set>

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "sdamarl/experience/harvest.hpp"
#include "support/quality_oracle.hpp"

using namespace sdamarl;
using namespace sdamarl::experience;
using test::brute_force_label;
using test::random_point;

namespace {

Transition make_transition(const TransitionSchema& s, double tag, Source src) {
  Transition t;
  const auto n = static_cast<Eigen::Index>(s.num_agents);
  t.obs = Eigen::VectorXd::Constant(n * static_cast<Eigen::Index>(s.obs_dim), tag);
  t.next_obs = t.obs;
  t.actions = Eigen::VectorXd::Constant(n * static_cast<Eigen::Index>(s.action_dim), tag);
  t.rewards = Eigen::VectorXd::Constant(n, tag);
  t.source = src;
  return t;
}

env::ScenarioConfig still_water() {
  env::ScenarioConfig c;
  c.current.uniform = Vec3::Zero();
  c.current.vortex_strength = 0.0;
  c.target_speed = 0.0;
  return c;
}

}  // namespace

// --- quality ---

TEST(Quality, CollinearApproach) {
  QualityParams q{std::numbers::pi / 4, 0.01};
  EXPECT_EQ(assess_quality(Vec3::Zero(), Vec3(1, 0, 0), Vec3(2, 0, 0), q), 1);
}

TEST(Quality, Retreat) {
  QualityParams q{std::numbers::pi / 4, 0.01};
  EXPECT_EQ(assess_quality(Vec3::Zero(), Vec3(-1, 0, 0), Vec3(2, 0, 0), q), 0);
}

TEST(Quality, TinyMotionIgnored) {
  QualityParams q{std::numbers::pi / 4, 1e-3};
  EXPECT_EQ(assess_quality(Vec3::Zero(), Vec3(1e-6, 0, 0), Vec3(2, 0, 0), q), 0);
  EXPECT_EQ(assess_quality(Vec3::Zero(), Vec3(-1e-6, 0, 0), Vec3(2, 0, 0), q), 0);
}

TEST(Quality, AlreadyAtTargetIsInvalid) {
  QualityParams q;
  EXPECT_EQ(assess_quality(Vec3(0.3, 0, 0), Vec3(0.31, 0, 0), Vec3(0.3, 0, 0), q), 0);
}

TEST(Quality, OvershootFailsConvergence) {
  QualityParams q;
  // Aligned with the target direction but ends farther away.
  EXPECT_EQ(assess_quality(Vec3::Zero(), Vec3(0.5, 0, 0), Vec3(0.2, 0, 0), q), 0);
}

TEST(Quality, AgreesWithBruteForce) {
  Rng rng = make_rng(1, 0);
  QualityParams q{0.6, 0.05};
  int ones = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 prev = random_point(rng), target = random_point(rng);
    const Vec3 curr = prev + random_point(rng, 0.3);
    const int label = assess_quality(prev, curr, target, q);
    ASSERT_EQ(label, brute_force_label(prev, curr, target, q)) << "triple " << i;
    ones += label;
  }
  EXPECT_GT(ones, 500);  // both outcomes well represented
  EXPECT_LT(ones, 9500);
}

TEST(Quality, RotationInvariant) {
  Rng rng = make_rng(2, 0);
  QualityParams q{0.7, 0.02};
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Quaterniond rot = Eigen::Quaterniond::UnitRandom();
    const Vec3 prev = random_point(rng), curr = prev + random_point(rng, 0.3), target = random_point(rng);
    EXPECT_EQ(assess_quality(prev, curr, target, q),
              assess_quality(rot * prev, rot * curr, rot * target, q));
  }
}

TEST(Quality, ScaleInvariant) {
  Rng rng = make_rng(3, 0);
  QualityParams q{0.7, 0.02};
  for (int i = 0; i < 2000; ++i) {
    const Vec3 prev = random_point(rng), curr = prev + random_point(rng, 0.3), target = random_point(rng);
    const double s = uniform(rng, 0.1, 10.0);
    QualityParams qs = q;
    qs.min_displacement *= s;
    EXPECT_EQ(assess_quality(prev, curr, target, q),
              assess_quality(prev, prev + s * (curr - prev), prev + s * (target - prev), qs));
  }
}

TEST(Quality, GateThresholds) {
  QualityParams q;
  EXPECT_EQ(harvest_threshold(2, q), 1u);
  EXPECT_EQ(harvest_threshold(3, q), 1u);
  EXPECT_EQ(harvest_threshold(4, q), 1u);
  EXPECT_EQ(harvest_threshold(6, q), 2u);
  EXPECT_EQ(harvest_threshold(8, q), 2u);
  EXPECT_TRUE(passes_harvest_gate({0, 1, 0}, q));
  EXPECT_FALSE(passes_harvest_gate({0, 0, 0}, q));
  EXPECT_FALSE(passes_harvest_gate({1, 0, 0, 0, 0, 0}, q));
  EXPECT_TRUE(passes_harvest_gate({1, 0, 0, 1, 0, 0}, q));
}

// --- replay ---

TEST(Replay, RingEvictsOldest) {
  TransitionSchema s{2, 3, 3};
  ReplayBuffer buf(s, 10);
  for (int i = 0; i < 11; ++i) buf.push(make_transition(s, i, Source::Live));
  EXPECT_EQ(buf.size(), 10u);
  EXPECT_EQ(buf.total_pushed() - buf.total_evicted(), buf.size());
  for (std::size_t k = 0; k < buf.size(); ++k) EXPECT_NE(buf.at(k).obs(0), 0.0);
}

TEST(Replay, SourceCounters) {
  TransitionSchema s{1, 2, 3};
  ReplayBuffer buf(s, 1000);
  buf.push(make_transition(s, 0, Source::Harvested));
  EXPECT_EQ(buf.count(Source::Harvested), 1u);
  ReplayBuffer mixed(s, 1000);
  for (int i = 0; i < 150; ++i) mixed.push(make_transition(s, i, i % 3 == 2 ? Source::Harvested : Source::Live));
  EXPECT_EQ(mixed.count(Source::Live), 100u);
  EXPECT_EQ(mixed.count(Source::Harvested), 50u);
}

TEST(Replay, CountersTrackEvictionAcrossSources) {
  TransitionSchema s{1, 1, 3};
  ReplayBuffer buf(s, 37);
  Rng rng = make_rng(4, 0);
  std::vector<Source> shadow;  // every push, in order
  for (int i = 0; i < 500; ++i) {
    const Source src = uniform(rng, 0, 1) < 0.3 ? Source::Harvested : Source::Live;
    buf.push(make_transition(s, i, src));
    shadow.push_back(src);
    std::size_t h = 0;
    const std::size_t from = shadow.size() > 37 ? shadow.size() - 37 : 0;
    for (std::size_t k = from; k < shadow.size(); ++k) h += shadow[k] == Source::Harvested;
    ASSERT_EQ(buf.count(Source::Harvested), h);
    ASSERT_EQ(buf.count(Source::Live) + buf.count(Source::Harvested), buf.size());
    ASSERT_EQ(buf.total_pushed() - buf.total_evicted(), buf.size());
  }
}

TEST(Replay, FiltersRespected) {
  TransitionSchema s{1, 1, 3};
  ReplayBuffer buf(s, 64);
  Rng rng = make_rng(5, 0);
  for (int i = 0; i < 200; ++i) buf.push(make_transition(s, i, i % 4 == 0 ? Source::Harvested : Source::Live));
  for (int k = 0; k < 200; ++k) {
    auto b = buf.sample(8, SourceFilter::OnlyHarvested, rng);
    ASSERT_TRUE(b);
    EXPECT_EQ(b->source.sum(), 8.0);
    auto m = buf.sample(8, SourceFilter::Mixed, rng);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->source.sum(), 4.0);
    auto a = buf.sample(20, SourceFilter::Any, rng);
    ASSERT_TRUE(a);
    std::set<std::size_t> distinct(a->slots.begin(), a->slots.end());
    EXPECT_EQ(distinct.size(), 20u);
  }
  EXPECT_FALSE(buf.sample(17, SourceFilter::OnlyHarvested, rng));
}

TEST(Replay, UnderfilledSignals) {
  TransitionSchema s{1, 1, 3};
  ReplayBuffer buf(s, 10);
  Rng rng = make_rng(6, 0);
  buf.push(make_transition(s, 7, Source::Live));
  EXPECT_FALSE(buf.sample(1, SourceFilter::OnlyHarvested, rng));
  EXPECT_FALSE(buf.sample(2, SourceFilter::Any, rng));
  auto one = buf.sample(1, SourceFilter::Any, rng);
  ASSERT_TRUE(one);
  EXPECT_EQ(one->obs(0, 0), 7.0);
}

TEST(Replay, SchemaMismatchRejected) {
  TransitionSchema s{2, 4, 3};
  ReplayBuffer buf(s, 10);
  Transition t = make_transition(TransitionSchema{2, 5, 3}, 0, Source::Live);
  EXPECT_THROW(buf.push(t), SchemaError);
}

TEST(Replay, UniformSampling) {
  TransitionSchema s{1, 1, 3};
  ReplayBuffer buf(s, 100);
  for (int i = 0; i < 100; ++i) buf.push(make_transition(s, i, Source::Live));
  Rng rng = make_rng(7, 0);
  std::vector<double> counts(100, 0.0);
  for (int k = 0; k < 10000; ++k) {
    const auto b = buf.sample(10, SourceFilter::Any, rng);
    for (auto slot : b->slots) counts[slot] += 1.0;
  }
  const double expected = 1000.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const double p = boost::math::gamma_q(99.0 / 2.0, chi2 / 2.0);
  EXPECT_GT(p, 0.01) << "chi2 = " << chi2;
}

// --- harvesting ---

TEST(Harvest, StationaryAgentsHarvestNothing) {
  env::ScenarioConfig c = still_water();
  c.num_auvs = 3;
  env::Environment e(c);
  e.reset(1);
  ReplayBuffer buf({3, c.observation_dim(), 3}, 1000);
  Rng rng = make_rng(1, 8);
  JointPolicy idle = [](const std::vector<Eigen::VectorXd>& o) { return std::vector<Vec3>(o.size(), Vec3::Zero()); };
  const auto st = harvest_episode(e, idle, QualityParams{}, buf, 50, 0.0, rng);
  EXPECT_EQ(st.steps, 50u);
  EXPECT_EQ(st.stored, 0u);
  EXPECT_EQ(buf.size(), 0u);
}

TEST(Harvest, PursuitHarvestsEveryStep) {
  env::ScenarioConfig c = still_water();
  c.num_auvs = 3;
  c.episode_length = 60;
  env::Environment e(c);
  e.reset(2);
  // Full thrust along the line of sight to the assigned target.
  JointPolicy chase = [&e](const std::vector<Eigen::VectorXd>&) {
    const auto& w = e.state();
    std::vector<Vec3> a;
    for (std::size_t i = 0; i < w.num_auvs(); ++i) {
      Vec3 los = w.target_position[w.assignment[i]] - w.auv_position[i];
      a.push_back(los / los.cwiseAbs().maxCoeff());
    }
    return a;
  };
  ReplayBuffer buf({3, c.observation_dim(), 3}, 1000);
  Rng rng = make_rng(2, 8);
  const auto st = harvest_episode(e, chase, QualityParams{}, buf, c.episode_length, 0.0, rng);
  EXPECT_EQ(st.steps, c.episode_length);
  EXPECT_EQ(st.stored, c.episode_length);
  EXPECT_EQ(buf.count(Source::Harvested), c.episode_length);
  // Every agent closes in: the gate would have passed with any one of them.
  EXPECT_EQ(st.valid_labels, 3 * c.episode_length);
}

TEST(Harvest, StopsAtEpisodeEnd) {
  env::ScenarioConfig c = still_water();
  c.episode_length = 5;
  env::Environment e(c);
  e.reset(3);
  ReplayBuffer buf({2, c.observation_dim(), 3}, 100);
  Rng rng = make_rng(3, 8);
  JointPolicy idle = [](const std::vector<Eigen::VectorXd>& o) { return std::vector<Vec3>(o.size(), Vec3::Zero()); };
  EXPECT_EQ(harvest_episode(e, idle, QualityParams{}, buf, 100, 0.3, rng).steps, 5u);
}
