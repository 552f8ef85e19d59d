#pragma once

#include <cmath>
#include <string>

#include "reachml/common.hpp"
#include "reachml/rng.hpp"

namespace reachml {

enum class Condition { Rot, RotPlus };

inline std::string condition_name(Condition c) {
  return c == Condition::Rot ? "rot" : "rotplus";
}

inline Condition condition_from_name(const std::string& s) {
  if (s == "rot") return Condition::Rot;
  if (s == "rotplus") return Condition::RotPlus;
  throw ConfigError("unknown condition '" + s + "' (expected rot or rotplus)");
}

// Provenance of a 2x2 visuomotor perturbation.
struct TransformSpec {
  double rotation_deg = 0.0;
  double shear = 0.0;
  double scale_x = 1.0;
  double scale_y = 1.0;

  bool pure_rotation() const {
    return shear == 0.0 && scale_x == 1.0 && scale_y == 1.0;
  }
};

struct LinearTransform {
  Eigen::Matrix2d m = Eigen::Matrix2d::Identity();
  TransformSpec spec;
};

// m = R(rotation) * Shear(s) * Scale(sx, sy), with Shear = [[1, s], [0, 1]].
inline LinearTransform compose(const TransformSpec& spec) {
  if (!(spec.scale_x > 0.0) || !(spec.scale_y > 0.0)) {
    throw std::invalid_argument("compose: scales must be positive");
  }
  const double a = deg_to_rad(spec.rotation_deg);
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix2d rot;
  rot << c, -s, s, c;
  Eigen::Matrix2d shear;
  shear << 1.0, spec.shear, 0.0, 1.0;
  Eigen::Matrix2d scale = Eigen::Vector2d(spec.scale_x, spec.scale_y).asDiagonal();
  return {rot * shear * scale, spec};
}

inline Point2 apply(const LinearTransform& t, const Point2& p) { return t.m * p; }

// Recovers the angle of a pure rotation matrix, degrees in (-180, 180].
inline double rotation_angle_deg(const Eigen::Matrix2d& m) {
  return rad_to_deg(std::atan2(m(1, 0), m(0, 0)));
}

struct SamplerParams {
  double rot_min_deg = -180.0;
  double rot_max_deg = 180.0;
  double shear_min = -0.5;
  double shear_max = 0.5;
  double scale_min = 0.77;  // log-uniform range, geometric mean ~1.3
  double scale_max = 2.2;
  double band_lo_deg = 50.0;  // substitution band (exclusive)
  double band_hi_deg = 70.0;
  double band_sub_deg = 60.0;

  void validate() const {
    if (!(rot_min_deg < rot_max_deg)) {
      throw ConfigError("sampler.rot_range_deg must be increasing");
    }
    if (!(shear_min <= shear_max)) {
      throw ConfigError("sampler.shear_range must be non-decreasing");
    }
    if (!(scale_min > 0.0) || !(scale_min <= scale_max)) {
      throw ConfigError("sampler.scale_range must be positive and non-decreasing");
    }
    if (!(band_lo_deg < band_sub_deg && band_sub_deg < band_hi_deg)) {
      throw ConfigError("sampler.substitute_angle_deg must lie inside the band");
    }
  }
};

inline LinearTransform sample_rot(Rng& rng, const SamplerParams& p) {
  TransformSpec spec;
  spec.rotation_deg = rng.uniform(p.rot_min_deg, p.rot_max_deg);
  return compose(spec);
}

// The Rot+ substitution rule: a drawn rotation with magnitude strictly inside
// (band_lo, band_hi) collapses to a pure rotation of sign * band_sub degrees,
// dropping the drawn shear and scales.
inline TransformSpec substitute_rotplus(const TransformSpec& drawn, const SamplerParams& p) {
  const double mag = std::abs(drawn.rotation_deg);
  if (mag > p.band_lo_deg && mag < p.band_hi_deg) {
    TransformSpec sub;
    sub.rotation_deg = drawn.rotation_deg < 0.0 ? -p.band_sub_deg : p.band_sub_deg;
    return sub;
  }
  return drawn;
}

// Draw order: rotation, shear, scale_x, scale_y. Scales are log-uniform.
inline LinearTransform sample_rotplus(Rng& rng, const SamplerParams& p) {
  TransformSpec spec;
  spec.rotation_deg = rng.uniform(p.rot_min_deg, p.rot_max_deg);
  spec.shear = rng.uniform(p.shear_min, p.shear_max);
  spec.scale_x = std::exp(rng.uniform(std::log(p.scale_min), std::log(p.scale_max)));
  spec.scale_y = std::exp(rng.uniform(std::log(p.scale_min), std::log(p.scale_max)));
  return compose(substitute_rotplus(spec, p));
}

inline LinearTransform sample_condition(Condition c, Rng& rng, const SamplerParams& p) {
  return c == Condition::Rot ? sample_rot(rng, p) : sample_rotplus(rng, p);
}

}  // namespace reachml
