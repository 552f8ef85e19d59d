#pragma once

#include <cmath>
#include <stdexcept>

#include "reachml/common.hpp"

namespace reachml {

// Two-link planar arm. Lengths in cm, angles in radians, time in seconds.
struct ArmGeometry {
  double upper_len = 30.0;
  double fore_len = 35.0;
  double vel_limit = 4.0;    // rad/s
  double acc_limit = 20.0;   // rad/s^2
  int steps_per_second = 14;
  double initial_shoulder = deg_to_rad(120.0);
  double initial_elbow = deg_to_rad(-90.0);

  double dt() const { return 1.0 / static_cast<double>(steps_per_second); }

  void validate() const {
    if (!(upper_len > 0.0) || !(fore_len > 0.0)) {
      throw ConfigError("geometry: link lengths must be positive");
    }
    if (!(vel_limit > 0.0) || !(acc_limit > 0.0)) {
      throw ConfigError("geometry: velocity/acceleration limits must be positive");
    }
    if (steps_per_second <= 0) {
      throw ConfigError("geometry.steps_per_second must be positive");
    }
    if (!std::isfinite(initial_shoulder) || !std::isfinite(initial_elbow)) {
      throw ConfigError("geometry.initial_pose_deg must be finite");
    }
  }
};

struct ArmState {
  double shoulder_angle = 0.0;
  double elbow_angle = 0.0;  // relative to the upper arm
  double shoulder_vel = 0.0;
  double elbow_vel = 0.0;

  bool finite() const {
    return std::isfinite(shoulder_angle) && std::isfinite(elbow_angle) &&
           std::isfinite(shoulder_vel) && std::isfinite(elbow_vel);
  }
};

// Joint angular accelerations, rad/s^2.
struct Action {
  double shoulder_acc = 0.0;
  double elbow_acc = 0.0;

  bool finite() const {
    return std::isfinite(shoulder_acc) && std::isfinite(elbow_acc);
  }
};

inline Action clamp_action(const Action& a, const ArmGeometry& g) {
  return {clamp(a.shoulder_acc, -g.acc_limit, g.acc_limit),
          clamp(a.elbow_acc, -g.acc_limit, g.acc_limit)};
}

// Semi-implicit Euler: velocity first, then position with the new velocity.
inline ArmState step_arm(const ArmState& s, const Action& a, const ArmGeometry& g) {
  if (!s.finite() || !a.finite()) {
    throw std::domain_error("step_arm: non-finite state or action");
  }
  const Action ca = clamp_action(a, g);
  const double dt = g.dt();
  ArmState n;
  n.shoulder_vel = clamp(s.shoulder_vel + ca.shoulder_acc * dt, -g.vel_limit, g.vel_limit);
  n.elbow_vel = clamp(s.elbow_vel + ca.elbow_acc * dt, -g.vel_limit, g.vel_limit);
  n.shoulder_angle = s.shoulder_angle + n.shoulder_vel * dt;
  n.elbow_angle = s.elbow_angle + n.elbow_vel * dt;
  return n;
}

inline Point2 tip_position(const ArmState& s, const ArmGeometry& g) {
  const double t1 = s.shoulder_angle;
  const double t12 = s.shoulder_angle + s.elbow_angle;
  return {g.upper_len * std::cos(t1) + g.fore_len * std::cos(t12),
          g.upper_len * std::sin(t1) + g.fore_len * std::sin(t12)};
}

inline ArmState initial_state(const ArmGeometry& g) {
  return {g.initial_shoulder, g.initial_elbow, 0.0, 0.0};
}

}  // namespace reachml
