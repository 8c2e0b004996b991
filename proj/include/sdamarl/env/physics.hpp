#pragma once

#include <cmath>
#include <stdexcept>

#include "sdamarl/env/params.hpp"

namespace sdamarl::env {

/// Spherical spreading plus linear absorption, in dB.
inline double transmission_loss(const SonarParams& sonar, double range_m) {
  if (!(range_m > 0.0)) throw std::invalid_argument("transmission_loss: range must be > 0");
  return 20.0 * std::log10(range_m) + sonar.absorption_db_per_km * range_m / 1000.0;
}

/// EM = SL - 2 TL + TS - (NL - DI) - DT for a caller-supplied TL.
inline double excess_margin_from_loss(const SonarParams& s, double transmission_loss_db) {
  return s.source_level - 2.0 * transmission_loss_db + s.target_strength -
         (s.noise_level - s.directivity_index) - s.detection_threshold;
}

inline double sonar_excess_margin(const SonarParams& sonar, double range_m) {
  return excess_margin_from_loss(sonar, transmission_loss(sonar, range_m));
}

inline bool sonar_detects(const SonarParams& sonar, double range_m) {
  if (range_m <= 0.0) return true;
  return sonar_excess_margin(sonar, range_m) >= 0.0;
}

/// Hydrodynamic load on a body moving at `rel_velocity` through the water
/// (body velocity minus local current). `flow_accel` is the time derivative
/// of the flow velocity seen by the body; the virtual-mass term is
/// density * C_VM * V * flow_accel.
inline Vec3 hydro_force(const FluidParams& fluid, const Vec3& rel_velocity, const Vec3& flow_accel) {
  Vec3 force = fluid.density * fluid.virtual_mass_coeff * fluid.displaced_volume * flow_accel;
  const double speed = rel_velocity.norm();
  if (speed == 0.0) return force;

  const Vec3 dir = rel_velocity / speed;
  const double dynamic = 0.5 * fluid.density * speed * speed * fluid.frontal_area;
  force -= dynamic * fluid.drag_coeff * dir;

  // Lift acts along world-up with the component parallel to the motion removed.
  const Vec3 up = Vec3::UnitZ();
  const Vec3 lift_dir = up - up.dot(dir) * dir;
  const double n = lift_dir.norm();
  if (n > 1e-12) force += dynamic * fluid.lift_coeff * lift_dir / n;
  return force;
}

/// sigma(d) = k * ln(1 + exp(-(d - (r_a + r_b)) / k)), evaluated stably.
inline double penetration_depth(double distance, double radius_a, double radius_b, double smoothing) {
  const double x = -(distance - (radius_a + radius_b)) / smoothing;
  const double softplus = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return smoothing * softplus;
}

/// Smooth repulsion on a from b, directed from b to a.
inline Vec3 collision_force(const Vec3& p_a, const Vec3& p_b, double radius_a, double radius_b,
                            const CollisionParams& params) {
  const Vec3 delta = p_a - p_b;
  const double d = delta.norm();
  if (d == 0.0) throw std::invalid_argument("collision_force: coincident positions, direction undefined");
  return params.contact_stiffness * penetration_depth(d, radius_a, radius_b, params.smoothing) * (delta / d);
}

inline Vec3 current_velocity(const CurrentParams& c, const Vec3& p) {
  const double r2 = p.x() * p.x() + p.y() * p.y();
  const double core = c.vortex_strength * std::exp(-r2 / (c.vortex_radius * c.vortex_radius));
  return c.uniform + core * Vec3(-p.y(), p.x(), 0.0) / c.vortex_radius;
}

}  // namespace sdamarl::env
