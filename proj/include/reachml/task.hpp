#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "reachml/arm.hpp"
#include "reachml/common.hpp"
#include "reachml/rng.hpp"
#include "reachml/transforms.hpp"

namespace reachml {

// What the agent sees: cursor and goal, both in cm. No joint state leaks out.
struct Observation {
  Point2 cursor = Point2::Zero();
  Point2 goal = Point2::Zero();

  bool operator==(const Observation& o) const {
    return cursor == o.cursor && goal == o.goal;
  }
};

struct EpisodeConfig {
  double dt = 1.0 / 14.0;
  int max_steps = 28;    // 2 s test reaches
  int walk_steps = 42;   // 3 s training walks
  int dwell_steps = 7;   // 500 ms inside the goal region ends the reach
  double goal_radius = 1.6;
  double goal_dist = 8.0;

  void validate() const {
    if (max_steps <= 0 || walk_steps <= 0) {
      throw ConfigError("episode: step counts must be positive");
    }
    if (dwell_steps <= 0) throw ConfigError("episode.dwell_steps must be positive");
    if (!(goal_radius > 0.0)) throw ConfigError("episode.goal_radius_cm must be positive");
    if (!(goal_dist > 0.0)) throw ConfigError("episode.goal_dist_cm must be positive");
  }
};

struct TaskInstance {
  LinearTransform transform;
  Point2 goal = Point2::Zero();
  EpisodeConfig episode;
  ArmGeometry geom;
};

struct StepRecord {
  Observation obs;
  Action action;  // as executed (post clamp)
  double reward = 0.0;
  bool done = false;
  int dwell_count = 0;
};

inline Point2 goal_from_angle(double angle_rad, double dist) {
  return {dist * std::cos(angle_rad), dist * std::sin(angle_rad)};
}

inline Point2 sample_goal(Rng& rng, const EpisodeConfig& cfg) {
  return goal_from_angle(rng.uniform(0.0, 2.0 * kPi), cfg.goal_dist);
}

inline Point2 cursor_of(const ArmState& arm, const LinearTransform& t,
                        const Point2& p0, const ArmGeometry& geom) {
  return apply(t, tip_position(arm, geom) - p0);
}

inline Observation observe(const ArmState& arm, const TaskInstance& task) {
  const Point2 p0 = tip_position(initial_state(task.geom), task.geom);
  return {cursor_of(arm, task.transform, p0, task.geom), task.goal};
}

// One reach episode. Reward is the negative cursor-goal distance; the episode
// ends after dwell_steps consecutive in-region steps or at max_steps.
class Environment {
 public:
  explicit Environment(TaskInstance task)
      : task_(std::move(task)),
        arm_(initial_state(task_.geom)),
        p0_(tip_position(arm_, task_.geom)) {
    obs_ = {Point2::Zero(), task_.goal};
  }

  const Observation& current() const { return obs_; }
  const TaskInstance& task() const { return task_; }
  bool done() const { return done_; }
  bool reached() const { return reached_; }
  int steps_taken() const { return steps_; }
  int dwell_count() const { return dwell_; }

  StepRecord step(const Action& a) {
    if (done_) throw std::logic_error("Environment::step: episode already finished");
    const Action ca = clamp_action(a, task_.geom);
    arm_ = step_arm(arm_, ca, task_.geom);
    ++steps_;
    obs_ = {cursor_of(arm_, task_.transform, p0_, task_.geom), task_.goal};
    const double dist = (obs_.cursor - task_.goal).norm();
    dwell_ = dist <= task_.episode.goal_radius ? dwell_ + 1 : 0;
    reached_ = dwell_ >= task_.episode.dwell_steps;
    done_ = reached_ || steps_ >= task_.episode.max_steps;
    return {obs_, ca, -dist, done_, dwell_};
  }

 private:
  TaskInstance task_;
  ArmState arm_;
  Point2 p0_;
  Observation obs_;
  int steps_ = 0;
  int dwell_ = 0;
  bool done_ = false;
  bool reached_ = false;
};

// One recorded random walk: steps actions, steps+1 cursor positions.
struct Trajectory {
  TransformSpec transform;
  Point2 goal = Point2::Zero();
  std::vector<Action> actions;
  std::vector<Point2> cursors;

  int steps() const { return static_cast<int>(actions.size()); }
};

// Re-derives the cursor positions of a recorded walk from its actions,
// transform, and the arm dynamics. Must reproduce the stored positions
// exactly; this is the corpus replay invariant.
inline std::vector<Point2> replay_cursors(const Trajectory& tr, const ArmGeometry& geom) {
  const LinearTransform t = compose(tr.transform);
  ArmState arm = initial_state(geom);
  const Point2 p0 = tip_position(arm, geom);
  std::vector<Point2> cursors{Point2::Zero()};
  cursors.reserve(tr.actions.size() + 1);
  for (const Action& a : tr.actions) {
    arm = step_arm(arm, a, geom);
    cursors.push_back(cursor_of(arm, t, p0, geom));
  }
  return cursors;
}

// Uniform i.i.d. actions over the clamped action box; runs to full length
// regardless of the goal region (dwell termination is ignored).
// Draw order per step: shoulder acceleration, then elbow.
inline Trajectory random_walk(const TaskInstance& task, int steps, Rng& rng) {
  Trajectory tr;
  tr.transform = task.transform.spec;
  tr.goal = task.goal;
  tr.actions.reserve(steps);
  tr.cursors.reserve(steps + 1);
  ArmState arm = initial_state(task.geom);
  const Point2 p0 = tip_position(arm, task.geom);
  tr.cursors.push_back(Point2::Zero());
  const double lim = task.geom.acc_limit;
  for (int t = 0; t < steps; ++t) {
    const Action a{rng.uniform(-lim, lim), rng.uniform(-lim, lim)};
    arm = step_arm(arm, a, task.geom);
    tr.actions.push_back(a);
    tr.cursors.push_back(cursor_of(arm, task.transform, p0, task.geom));
  }
  return tr;
}

}  // namespace reachml
