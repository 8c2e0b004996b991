#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdamarl/env/world.hpp"
#include "sdamarl/marl/config.hpp"

namespace sdamarl::harness {

using nlohmann::json;

class UnknownKeyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnknownPresetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything one training run needs. Serialized in full into every run
/// directory.
struct RunConfig {
  env::ScenarioConfig scenario;
  marl::TrainConfig train;
  marl::Algo algo = marl::Algo::SdaMarl;
  std::size_t eval_episodes = 20;
  std::size_t checkpoint_interval = 0;  // episodes; 0 = only at the end

  void validate() const {
    scenario.validate();
    train.validate();
    if (eval_episodes == 0) throw std::invalid_argument("eval_episodes must be >= 1");
  }
};

// ---- JSON mapping ---------------------------------------------------------

inline json vec_json(const env::Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline env::Vec3 vec_from(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument(key + " must be an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json obstacle_json(const env::Obstacle& o) { return {{"position", vec_json(o.position)}, {"radius", o.radius}}; }

inline json to_json(const env::ScenarioConfig& s) {
  json obstacles = json::array();
  for (const auto& o : s.obstacles) obstacles.push_back(obstacle_json(o));
  const auto& f = s.fluid;
  const auto& so = s.sonar;
  const auto& c = s.collision;
  const auto& r = s.reward;
  const auto& cu = s.current;
  return {{"name", s.name},
          {"num_auvs", s.num_auvs},
          {"num_targets", s.num_targets},
          {"obstacles", obstacles},
          {"episode_length", s.episode_length},
          {"ring_radius", s.ring_radius},
          {"target_spawn_extent", s.target_spawn_extent},
          {"target_speed", s.target_speed},
          {"auv_mass", s.auv_mass},
          {"max_thrust", s.max_thrust},
          {"world_scale_m", s.world_scale_m},
          {"fluid",
           {{"density", f.density},
            {"viscosity", f.viscosity},
            {"drag_coeff", f.drag_coeff},
            {"lift_coeff", f.lift_coeff},
            {"virtual_mass_coeff", f.virtual_mass_coeff},
            {"frontal_area", f.frontal_area},
            {"displaced_volume", f.displaced_volume},
            {"damping", f.damping},
            {"dt", f.dt}}},
          {"sonar",
           {{"source_level", so.source_level},
            {"target_strength", so.target_strength},
            {"noise_level", so.noise_level},
            {"directivity_index", so.directivity_index},
            {"detection_threshold", so.detection_threshold},
            {"absorption_db_per_km", so.absorption_db_per_km}}},
          {"collision",
           {{"smoothing", c.smoothing}, {"contact_stiffness", c.contact_stiffness}, {"auv_radius", c.auv_radius}}},
          {"reward",
           {{"position_weight", r.position_weight},
            {"collision_weight", r.collision_weight},
            {"landmark_weight", r.landmark_weight},
            {"proximity_modulator", r.proximity_modulator},
            {"target_margin", r.target_margin},
            {"auv_margin", r.auv_margin},
            {"landmark_margin", r.landmark_margin},
            {"landmark_penalty", r.landmark_penalty}}},
          {"current",
           {{"uniform", vec_json(cu.uniform)},
            {"vortex_strength", cu.vortex_strength},
            {"vortex_radius", cu.vortex_radius}}}};
}

inline json to_json(const marl::TrainConfig& t) {
  return {{"episodes", t.episodes},
          {"episode_length", t.episode_length},
          {"batch", t.batch},
          {"update_interval", t.update_interval},
          {"warmup", t.warmup},
          {"replay_capacity", t.replay_capacity},
          {"tau", t.tau},
          {"gamma", t.gamma},
          {"actor_lr", t.actor_lr},
          {"critic_lr", t.critic_lr},
          {"diffusion_lr", t.diffusion_lr},
          {"explore_sigma", t.explore_sigma},
          {"harvest", t.harvest},
          {"diffusion_updates", t.diffusion_updates},
          {"harvest_sigma", t.harvest_sigma},
          {"diffusion_steps", t.diffusion_steps},
          {"q_weight", t.q_weight},
          {"clone_weight_start", t.clone_weight_start},
          {"clone_weight_end", t.clone_weight_end},
          {"n_candidates", t.n_candidates},
          {"ema_interval", t.ema_interval},
          {"ema_decay", t.ema_decay},
          {"seed", t.seed},
          {"networks",
           {{"actor_hidden", t.nets.actor_hidden},
            {"critic_hidden", t.nets.critic_hidden},
            {"diffusion_hidden", t.nets.diffusion_hidden}}},
          {"quality",
           {{"angle_threshold", t.quality.angle_threshold},
            {"min_displacement", t.quality.min_displacement},
            {"valid_ratio", t.quality.valid_ratio}}}};
}

inline json to_json(const RunConfig& c) {
  return {{"scenario", to_json(c.scenario)},
          {"train", to_json(c.train)},
          {"algo", marl::to_string(c.algo)},
          {"eval_episodes", c.eval_episodes},
          {"checkpoint_interval", c.checkpoint_interval}};
}

/// Rejects any key of `doc` that is absent from `reference`, recursively.
/// Obstacle list entries are checked against a default obstacle.
inline void check_keys(const json& doc, const json& reference, const std::string& where = "") {
  if (!doc.is_object()) return;
  for (const auto& [key, value] : doc.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!reference.contains(key)) throw UnknownKeyError("unknown config key '" + path + "'");
    const json& ref = reference.at(key);
    if (value.is_object() && ref.is_object()) {
      check_keys(value, ref, path);
    } else if (key == "obstacles" && value.is_array()) {
      const json proto = obstacle_json(env::Obstacle{});
      for (std::size_t i = 0; i < value.size(); ++i) check_keys(value[i], proto, path + "[" + std::to_string(i) + "]");
    }
  }
}

inline env::ScenarioConfig scenario_from_json(const json& j) {
  env::ScenarioConfig s;
  s.name = j.at("name").get<std::string>();
  s.num_auvs = j.at("num_auvs").get<std::size_t>();
  s.num_targets = j.at("num_targets").get<std::size_t>();
  for (const auto& o : j.at("obstacles"))
    s.obstacles.push_back({vec_from(o.at("position"), "obstacle position"), o.at("radius").get<double>()});
  s.episode_length = j.at("episode_length").get<std::size_t>();
  s.ring_radius = j.at("ring_radius").get<double>();
  s.target_spawn_extent = j.at("target_spawn_extent").get<double>();
  s.target_speed = j.at("target_speed").get<double>();
  s.auv_mass = j.at("auv_mass").get<double>();
  s.max_thrust = j.at("max_thrust").get<double>();
  s.world_scale_m = j.at("world_scale_m").get<double>();
  const json& f = j.at("fluid");
  s.fluid = {f.at("density").get<double>(),        f.at("viscosity").get<double>(),
             f.at("drag_coeff").get<double>(),     f.at("lift_coeff").get<double>(),
             f.at("virtual_mass_coeff").get<double>(), f.at("frontal_area").get<double>(),
             f.at("displaced_volume").get<double>(), f.at("damping").get<double>(),
             f.at("dt").get<double>()};
  const json& so = j.at("sonar");
  s.sonar = {so.at("source_level").get<double>(),      so.at("target_strength").get<double>(),
             so.at("noise_level").get<double>(),       so.at("directivity_index").get<double>(),
             so.at("detection_threshold").get<double>(), so.at("absorption_db_per_km").get<double>()};
  const json& c = j.at("collision");
  s.collision = {c.at("smoothing").get<double>(), c.at("contact_stiffness").get<double>(),
                 c.at("auv_radius").get<double>()};
  const json& r = j.at("reward");
  s.reward = {r.at("position_weight").get<double>(),  r.at("collision_weight").get<double>(),
              r.at("landmark_weight").get<double>(),  r.at("proximity_modulator").get<double>(),
              r.at("target_margin").get<double>(),    r.at("auv_margin").get<double>(),
              r.at("landmark_margin").get<double>(),  r.at("landmark_penalty").get<double>()};
  const json& cu = j.at("current");
  s.current = {vec_from(cu.at("uniform"), "current.uniform"), cu.at("vortex_strength").get<double>(),
               cu.at("vortex_radius").get<double>()};
  return s;
}

inline marl::TrainConfig train_from_json(const json& j) {
  marl::TrainConfig t;
  t.episodes = j.at("episodes").get<std::size_t>();
  t.episode_length = j.at("episode_length").get<std::size_t>();
  t.batch = j.at("batch").get<std::size_t>();
  t.update_interval = j.at("update_interval").get<std::size_t>();
  t.warmup = j.at("warmup").get<std::size_t>();
  t.replay_capacity = j.at("replay_capacity").get<std::size_t>();
  t.tau = j.at("tau").get<double>();
  t.gamma = j.at("gamma").get<double>();
  t.actor_lr = j.at("actor_lr").get<double>();
  t.critic_lr = j.at("critic_lr").get<double>();
  t.diffusion_lr = j.at("diffusion_lr").get<double>();
  t.explore_sigma = j.at("explore_sigma").get<double>();
  t.harvest = j.at("harvest").get<bool>();
  t.diffusion_updates = j.at("diffusion_updates").get<bool>();
  t.harvest_sigma = j.at("harvest_sigma").get<double>();
  t.diffusion_steps = j.at("diffusion_steps").get<std::size_t>();
  t.q_weight = j.at("q_weight").get<double>();
  t.clone_weight_start = j.at("clone_weight_start").get<double>();
  t.clone_weight_end = j.at("clone_weight_end").get<double>();
  t.n_candidates = j.at("n_candidates").get<std::size_t>();
  t.ema_interval = j.at("ema_interval").get<std::size_t>();
  t.ema_decay = j.at("ema_decay").get<double>();
  t.seed = j.at("seed").get<std::uint64_t>();
  const json& n = j.at("networks");
  t.nets.actor_hidden = n.at("actor_hidden").get<std::vector<std::size_t>>();
  t.nets.critic_hidden = n.at("critic_hidden").get<std::vector<std::size_t>>();
  t.nets.diffusion_hidden = n.at("diffusion_hidden").get<std::vector<std::size_t>>();
  const json& q = j.at("quality");
  t.quality.angle_threshold = q.at("angle_threshold").get<double>();
  t.quality.min_displacement = q.at("min_displacement").get<double>();
  t.quality.valid_ratio = q.at("valid_ratio").get<double>();
  return t;
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.scenario = scenario_from_json(j.at("scenario"));
  c.train = train_from_json(j.at("train"));
  c.algo = marl::parse_algo(j.at("algo").get<std::string>());
  c.eval_episodes = j.at("eval_episodes").get<std::size_t>();
  c.checkpoint_interval = j.at("checkpoint_interval").get<std::size_t>();
  return c;
}

// ---- presets --------------------------------------------------------------

/// Keeps the per-episode travel of AUVs and targets fixed when the episode
/// length changes.
inline void rescale_for_episode_length(env::ScenarioConfig& s, std::size_t episode_length) {
  s.target_speed = env::ScenarioConfig{}.target_speed * 400.0 / static_cast<double>(episode_length);
  s.episode_length = episode_length;
  s.max_thrust = env::crossing_thrust(episode_length, s.fluid, s.auv_mass);
}

inline const std::map<std::string, std::pair<std::size_t, std::size_t>>& preset_table() {
  static const std::map<std::string, std::pair<std::size_t, std::size_t>> table{
      {"2v1", {2, 1}}, {"4v2", {4, 2}}, {"6v2", {6, 2}}, {"8v3", {8, 3}}};
  return table;
}

inline std::string preset_names() {
  std::string out;
  for (const auto& [name, sizes] : preset_table()) out += (out.empty() ? "" : ", ") + name;
  return out;
}

inline env::ScenarioConfig preset_scenario(const std::string& name) {
  const auto it = preset_table().find(name);
  if (it == preset_table().end())
    throw UnknownPresetError("unknown preset '" + name + "'; available: " + preset_names());
  env::ScenarioConfig s;
  s.name = name;
  s.num_auvs = it->second.first;
  s.num_targets = it->second.second;
  s.obstacles = {{env::Vec3(0.45, 0.45, 0.0), 0.05}, {env::Vec3(-0.45, -0.3, 0.2), 0.05}};
  return s;
}

/// Full-size schedule: 4000 episodes of 400 steps, batch 256, 256-wide layers.
inline RunConfig full_scale(const std::string& preset, marl::Algo algo, std::uint64_t seed) {
  RunConfig c;
  c.scenario = preset_scenario(preset);
  rescale_for_episode_length(c.scenario, c.train.episode_length);
  c.algo = algo;
  c.train = marl::config_for(algo, c.train);
  c.train.seed = seed;
  return c;
}

/// Laptop-sized run: 300 episodes of 100 steps with narrower networks,
/// smaller batches and a faster EMA.
inline RunConfig desk_scale(const std::string& preset, marl::Algo algo, std::uint64_t seed) {
  RunConfig c;
  c.scenario = preset_scenario(preset);
  marl::TrainConfig& t = c.train;
  t.episodes = 300;
  t.episode_length = 100;
  t.batch = 64;
  t.update_interval = 5;
  t.warmup = 1000;
  t.replay_capacity = 100000;
  t.ema_decay = 0.95;  // about 3000 update cycles in total, so a shorter average
  t.nets.actor_hidden = {64, 64};
  t.nets.critic_hidden = {64, 64};
  t.nets.diffusion_hidden = {64, 64};
  rescale_for_episode_length(c.scenario, t.episode_length);
  c.algo = algo;
  c.train = marl::config_for(algo, c.train);
  c.train.seed = seed;
  return c;
}

/// Applies a JSON merge patch to `base`; unknown keys are rejected before
/// anything is applied.
inline RunConfig apply_patch(const RunConfig& base, const json& patch) {
  json doc = to_json(base);
  check_keys(patch, doc);
  const bool algo_changed = patch.contains("algo");
  doc.merge_patch(patch);
  RunConfig c = run_config_from_json(doc);
  // A patched algorithm switch applies its reductions on top of the patch.
  if (algo_changed) c.train = marl::config_for(c.algo, c.train);
  c.validate();
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace sdamarl::harness
