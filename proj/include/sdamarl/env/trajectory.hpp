#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdamarl/env/world.hpp"

namespace sdamarl::env {

struct StepRecord {
  std::size_t episode = 0;
  std::size_t step = 0;
  std::vector<Vec3> auv_position;
  std::vector<Vec3> auv_velocity;
  std::vector<Vec3> target_position;
  std::vector<Vec3> target_velocity;
  std::vector<std::size_t> assignment;
  std::vector<double> rewards;  // empty for the reset record
};

inline StepRecord snapshot(const WorldState& w, std::size_t episode, std::vector<double> rewards = {}) {
  return {episode,           w.step,       w.auv_position, w.auv_velocity, w.target_position,
          w.target_velocity, w.assignment, std::move(rewards)};
}

namespace detail {
inline nlohmann::json to_json(const std::vector<Vec3>& vs) {
  auto out = nlohmann::json::array();
  for (const auto& v : vs) out.push_back({v.x(), v.y(), v.z()});
  return out;
}
inline std::vector<Vec3> vec3_list(const nlohmann::json& j) {
  std::vector<Vec3> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 3) throw std::runtime_error("trajectory: expected a 3-vector");
    out.emplace_back(e[0].get<double>(), e[1].get<double>(), e[2].get<double>());
  }
  return out;
}
}  // namespace detail

inline nlohmann::json to_json(const StepRecord& r) {
  return {{"episode", r.episode},
          {"step", r.step},
          {"auv_positions", detail::to_json(r.auv_position)},
          {"auv_velocities", detail::to_json(r.auv_velocity)},
          {"target_positions", detail::to_json(r.target_position)},
          {"target_velocities", detail::to_json(r.target_velocity)},
          {"assignment", r.assignment},
          {"rewards", r.rewards}};
}

inline StepRecord step_record_from_json(const nlohmann::json& j) {
  StepRecord r;
  r.episode = j.at("episode").get<std::size_t>();
  r.step = j.at("step").get<std::size_t>();
  r.auv_position = detail::vec3_list(j.at("auv_positions"));
  r.auv_velocity = detail::vec3_list(j.at("auv_velocities"));
  r.target_position = detail::vec3_list(j.at("target_positions"));
  r.target_velocity = detail::vec3_list(j.at("target_velocities"));
  r.assignment = j.at("assignment").get<std::vector<std::size_t>>();
  r.rewards = j.at("rewards").get<std::vector<double>>();
  return r;
}

/// One episode: the reset state followed by one record per step.
struct EpisodeLog {
  std::vector<StepRecord> records;

  std::size_t steps() const { return records.empty() ? 0 : records.size() - 1; }

  void write_jsonl(std::ostream& os) const {
    for (const auto& r : records) os << to_json(r).dump() << '\n';
  }
};

/// Reads every record in a JSONL stream. A non-empty `expected_steps`
/// rejects logs whose episodes are not exactly that long.
inline std::vector<EpisodeLog> read_trajectories(std::istream& is, std::size_t expected_steps = 0) {
  std::vector<EpisodeLog> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    StepRecord r;
    try {
      r = step_record_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw std::runtime_error("trajectory line " + std::to_string(lineno) + ": " + e.what());
    }
    if (r.step == 0) out.emplace_back();
    if (out.empty()) throw std::runtime_error("trajectory: first record is not a reset (step 0)");
    if (r.step != out.back().records.size())
      throw std::runtime_error("trajectory line " + std::to_string(lineno) + ": step out of order");
    out.back().records.push_back(std::move(r));
  }
  if (expected_steps > 0)
    for (const auto& ep : out)
      if (ep.steps() != expected_steps)
        throw std::runtime_error("trajectory: episode has " + std::to_string(ep.steps()) + " steps, expected " +
                                 std::to_string(expected_steps));
  return out;
}

inline std::vector<EpisodeLog> read_trajectories(const std::string& path, std::size_t expected_steps = 0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file " + path);
  return read_trajectories(in, expected_steps);
}

}  // namespace sdamarl::env
