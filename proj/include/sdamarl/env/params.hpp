#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sdamarl::env {

using Vec3 = Eigen::Vector3d;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

// All lengths below are in normalized world units (the world is [-1, 1]^3)
// and times in seconds. Coefficients are dimensionless.

struct FluidParams {
  double density = 1000.0;         // kg/m^3
  double viscosity = 1e-3;         // Pa*s; recorded, not used by the force model
  double drag_coeff = 0.8;
  double lift_coeff = 0.1;
  double virtual_mass_coeff = 0.5;
  double frontal_area = 5e-3;
  double displaced_volume = 1e-4;
  double damping = 0.25;
  double dt = 0.1;

  void validate() const {
    require(density > 0.0, "fluid.density must be > 0");
    require(viscosity > 0.0, "fluid.viscosity must be > 0");
    require(frontal_area > 0.0, "fluid.frontal_area must be > 0");
    require(displaced_volume > 0.0, "fluid.displaced_volume must be > 0");
    require(damping >= 0.0 && damping <= 1.0, "fluid.damping must lie in [0, 1]");
    require(dt > 0.0, "fluid.dt must be > 0");
  }
};

/// Active sonar budget terms, all in dB; absorption in dB/km.
struct SonarParams {
  double source_level = 190.0;
  double target_strength = 15.0;
  double noise_level = 70.0;
  double directivity_index = 20.0;
  double detection_threshold = 10.0;
  double absorption_db_per_km = 0.05;

  void validate() const { require(absorption_db_per_km >= 0.0, "sonar.absorption_db_per_km must be >= 0"); }
};

struct CollisionParams {
  double smoothing = 0.004;          // k
  double contact_stiffness = 50.0;   // F_contact
  double auv_radius = 0.016;

  void validate() const {
    require(smoothing > 0.0, "collision.smoothing must be > 0");
    require(contact_stiffness > 0.0, "collision.contact_stiffness must be > 0");
    require(auv_radius > 0.0, "collision.auv_radius must be > 0");
  }
};

struct RewardParams {
  double position_weight = 1.0;     // alpha
  double collision_weight = 0.1;    // beta
  double landmark_weight = 1.0;     // gamma_w
  double proximity_modulator = 2.0; // w
  double target_margin = 0.032;     // delta_t^min
  double auv_margin = 0.032;        // delta_a^min
  double landmark_margin = 0.1;     // delta_l^min
  double landmark_penalty = 1.0;    // P_land

  void validate() const {
    require(position_weight >= 0.0 && collision_weight >= 0.0 && landmark_weight >= 0.0,
            "reward weights must be >= 0");
    require(proximity_modulator > 1.0, "reward.proximity_modulator must be > 1");
    require(target_margin > 0.0 && auv_margin > 0.0 && landmark_margin > 0.0, "reward margins must be > 0");
    require(landmark_penalty > 0.0, "reward.landmark_penalty must be > 0");
  }
};

/// Steady uniform flow plus a Gaussian-core vortex about the z axis.
struct CurrentParams {
  Vec3 uniform = Vec3(0.01, 0.0, 0.0);
  double vortex_strength = 0.02;
  double vortex_radius = 0.5;

  void validate() const {
    require(uniform.allFinite(), "current.uniform must be finite");
    require(vortex_radius > 0.0, "current.vortex_radius must be > 0");
  }
};

struct Obstacle {
  Vec3 position = Vec3::Zero();
  double radius = 0.05;
};

}  // namespace sdamarl::env
