#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "reachml/common.hpp"
#include "reachml/rng.hpp"

namespace reachml {

// Per-reach record. cumulative_penalty is the negated reward sum over the
// steps actually executed, so early termination stops the accrual.
struct TrialMetrics {
  double cumulative_penalty = 0.0;
  double angular_error_200ms_deg = std::numeric_limits<double>::quiet_NaN();
  bool angular_error_valid = false;
  std::vector<double> speed_series;  // cm/s per executed step
  double mean_speed = 0.0;
  double min_goal_distance = 0.0;
  bool reached = false;  // final cursor inside the goal region
  std::vector<Point2> trajectory;  // cursor positions, step 0 included
  int steps = 0;
};

// cursors holds the cursor at step 0 through the last executed step.
// The 200 ms angular error is read at step ceil(0.2 / dt) (step 3 at 14
// steps/s); a zero-length displacement there is flagged invalid.
inline TrialMetrics compute_metrics(const std::vector<Point2>& cursors, const Point2& goal,
                                    double dt, double goal_radius) {
  if (cursors.empty()) throw std::invalid_argument("compute_metrics: empty trajectory");
  TrialMetrics m;
  m.trajectory = cursors;
  m.steps = static_cast<int>(cursors.size()) - 1;

  m.min_goal_distance = std::numeric_limits<double>::infinity();
  for (const auto& p : cursors) {
    m.min_goal_distance = std::min(m.min_goal_distance, (p - goal).norm());
  }
  for (int t = 1; t <= m.steps; ++t) {
    m.cumulative_penalty += (cursors[t] - goal).norm();
    m.speed_series.push_back((cursors[t] - cursors[t - 1]).norm() / dt);
  }
  if (!m.speed_series.empty()) {
    double s = 0.0;
    for (double v : m.speed_series) s += v;
    m.mean_speed = s / static_cast<double>(m.speed_series.size());
  }

  const int probe = static_cast<int>(std::ceil(0.2 / dt));
  if (probe <= m.steps) {
    const Point2 d = cursors[probe] - cursors[0];
    const Point2 g = goal - cursors[0];
    if (d.norm() > 1e-12 && g.norm() > 1e-12) {
      const double cosang = clamp(d.dot(g) / (d.norm() * g.norm()), -1.0, 1.0);
      m.angular_error_200ms_deg = rad_to_deg(std::acos(cosang));
      m.angular_error_valid = true;
    }
  }
  m.reached = (cursors.back() - goal).norm() <= goal_radius;
  return m;
}

// Rotates cursor points by -goal_angle so the goal maps onto the +x axis,
// and mirrors blocks run under a negative test rotation so all trajectories
// curl the same way. Enables averaging across blocks and rotation signs.
inline std::vector<Point2> normalize_trajectory(const std::vector<Point2>& traj,
                                                double rotation_deg, const Point2& goal) {
  const double ga = std::atan2(goal.y(), goal.x());
  const double c = std::cos(-ga), s = std::sin(-ga);
  std::vector<Point2> out;
  out.reserve(traj.size());
  for (const auto& p : traj) {
    Point2 q{c * p.x() - s * p.y(), s * p.x() + c * p.y()};
    if (rotation_deg < 0.0) q.y() = -q.y();
    out.push_back(q);
  }
  return out;
}

// Percentile bootstrap over the sample mean.
struct Ci {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

inline Ci bootstrap_ci(const std::vector<double>& values, int resamples, double alpha,
                       Rng& rng) {
  Ci ci;
  if (values.empty()) return ci;
  double sum = 0.0;
  for (double v : values) sum += v;
  ci.mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) {
    ci.lo = ci.hi = ci.mean;
    return ci;
  }
  std::vector<double> means(resamples);
  for (int r = 0; r < resamples; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      s += values[rng.uniform_int(values.size())];
    }
    means[r] = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  auto pick = [&means](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return means[lo] * (1.0 - frac) + means[hi] * frac;
  };
  ci.lo = pick(alpha / 2.0);
  ci.hi = pick(1.0 - alpha / 2.0);
  return ci;
}

// RMS distance of points from their centroid; the spread statistic used for
// final-position variability.
inline double position_spread(const std::vector<Point2>& pts) {
  if (pts.empty()) return 0.0;
  Point2 mean = Point2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double sq = 0.0;
  for (const auto& p : pts) sq += (p - mean).squaredNorm();
  return std::sqrt(sq / static_cast<double>(pts.size()));
}

}  // namespace reachml
