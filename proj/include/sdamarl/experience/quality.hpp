#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace sdamarl::experience {

using Vec3 = Eigen::Vector3d;

struct QualityParams {
  double angle_threshold = std::numbers::pi / 4.0;  // radians, in (0, pi/2)
  double min_displacement = 1e-3;                   // normalized units
  double valid_ratio = 1.0 / 3.0;                   // share of agents that must be valid

  void validate() const {
    if (!(angle_threshold > 0.0 && angle_threshold < std::numbers::pi / 2.0))
      throw std::invalid_argument("quality.angle_threshold must lie in (0, pi/2)");
    if (!(min_displacement > 0.0)) throw std::invalid_argument("quality.min_displacement must be > 0");
    if (!(valid_ratio > 0.0 && valid_ratio <= 1.0)) throw std::invalid_argument("quality.valid_ratio must lie in (0, 1]");
  }
};

/// 1 when the step moved the agent both toward its target (within the
/// angular tolerance) and closer to it; 0 otherwise, including for
/// negligible motion or an agent already sitting on the target.
inline int assess_quality(const Vec3& prev, const Vec3& curr, const Vec3& target, const QualityParams& q) {
  const Vec3 step = curr - prev;
  const Vec3 to_target = target - prev;
  const double step_len = step.norm();
  const double target_len = to_target.norm();
  if (step_len < q.min_displacement || target_len == 0.0) return 0;
  const double cos_angle = step.dot(to_target) / (step_len * target_len);
  const bool aligned = cos_angle > std::cos(q.angle_threshold);
  const bool converging = (curr - target).norm() < (prev - target).norm();
  return aligned && converging ? 1 : 0;
}

/// Minimum number of valid agents for a joint step to be kept:
/// max(1, floor(N * ratio)).
inline std::size_t harvest_threshold(std::size_t num_agents, const QualityParams& q) {
  const auto n = static_cast<std::size_t>(std::floor(static_cast<double>(num_agents) * q.valid_ratio + 1e-9));
  return n < 1 ? 1 : n;
}

inline bool passes_harvest_gate(const std::vector<int>& labels, const QualityParams& q) {
  std::size_t valid = 0;
  for (int l : labels) valid += l == 1;
  return valid >= harvest_threshold(labels.size(), q);
}

}  // namespace sdamarl::experience
