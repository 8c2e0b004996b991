#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdamarl/env/trajectory.hpp"

namespace sdamarl::harness {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

/// Population mean and standard deviation; {0, 0} for an empty sample.
inline MeanSd mean_sd(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / n)};
}

/// Tracking statistics of one episode.
struct EpisodeMetrics {
  std::size_t steps = 0;
  double mean_return = 0.0;             // cumulative reward, averaged over AUVs
  std::vector<double> returns;          // per AUV
  double accuracy = 0.0;                // in [0, 1]
  double velocity_diff_mean = 0.0;
  double velocity_diff_sd = 0.0;
  std::vector<double> path_length;      // per AUV, normalized units
  double path_length_mean = 0.0;
  double path_length_sd = 0.0;
};

inline constexpr double kAccuracyThreshold = 0.08;

/// Accuracy: share of steps 1..L with the assigned target closer than the
/// threshold, averaged over AUVs. Velocity difference: |v_auv - v_target|
/// over all (step, AUV) pairs. Path length: summed step displacement.
inline EpisodeMetrics compute_metrics(const env::EpisodeLog& log, std::size_t expected_steps = 0,
                                      double threshold = kAccuracyThreshold) {
  if (log.records.size() < 2) throw std::invalid_argument("compute_metrics: episode has no steps");
  const std::size_t L = log.steps();
  if (expected_steps != 0 && L != expected_steps)
    throw std::invalid_argument("compute_metrics: truncated log with " + std::to_string(L) + " of " +
                                std::to_string(expected_steps) + " steps");
  const std::size_t n = log.records.front().auv_position.size();

  EpisodeMetrics m;
  m.steps = L;
  m.returns.assign(n, 0.0);
  m.path_length.assign(n, 0.0);
  std::vector<double> vdiff;
  vdiff.reserve(L * n);
  std::size_t hits = 0;
  for (std::size_t k = 1; k <= L; ++k) {
    const auto& r = log.records[k];
    const auto& prev = log.records[k - 1];
    if (r.auv_position.size() != n || r.rewards.size() != n)
      throw std::invalid_argument("compute_metrics: record " + std::to_string(k) + " has the wrong agent count");
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t t = r.assignment.at(i);
      if ((r.auv_position[i] - r.target_position[t]).norm() < threshold) ++hits;
      vdiff.push_back((r.auv_velocity[i] - r.target_velocity[t]).norm());
      m.path_length[i] += (r.auv_position[i] - prev.auv_position[i]).norm();
      m.returns[i] += r.rewards[i];
    }
  }
  m.accuracy = static_cast<double>(hits) / static_cast<double>(L * n);
  const auto v = mean_sd(vdiff);
  m.velocity_diff_mean = v.mean;
  m.velocity_diff_sd = v.sd;
  const auto p = mean_sd(m.path_length);
  m.path_length_mean = p.mean;
  m.path_length_sd = p.sd;
  m.mean_return = mean_sd(m.returns).mean;
  return m;
}

}  // namespace sdamarl::harness
