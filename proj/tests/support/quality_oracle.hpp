#pragma once

// Independent quality-label oracle: angle via atan2 of the cross and dot
// products and squared distances, sharing no code path with the cosine test
// in assess_quality.

#include <cmath>

#include "sdamarl/common/random.hpp"
#include "sdamarl/experience/quality.hpp"

namespace sdamarl::test {

using experience::QualityParams;
using Vec3 = Eigen::Vector3d;

inline Vec3 random_point(Rng& rng, double scale = 1.0) {
  return scale * Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
}

inline int brute_force_label(const Vec3& prev, const Vec3& curr, const Vec3& target, const QualityParams& q) {
  const double dx = curr.x() - prev.x(), dy = curr.y() - prev.y(), dz = curr.z() - prev.z();
  const double tx = target.x() - prev.x(), ty = target.y() - prev.y(), tz = target.z() - prev.z();
  if (dx * dx + dy * dy + dz * dz < q.min_displacement * q.min_displacement) return 0;
  if (tx == 0 && ty == 0 && tz == 0) return 0;
  const double cx = dy * tz - dz * ty, cy = dz * tx - dx * tz, cz = dx * ty - dy * tx;
  const double angle = std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dx * tx + dy * ty + dz * tz);
  auto sq = [](const Vec3& a, const Vec3& b) { return (a - b).squaredNorm(); };
  return angle < q.angle_threshold && sq(curr, target) < sq(prev, target) ? 1 : 0;
}

}  // namespace sdamarl::test
