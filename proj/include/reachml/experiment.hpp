#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "reachml/common.hpp"
#include "reachml/forward_model.hpp"
#include "reachml/metrics.hpp"
#include "reachml/planner.hpp"
#include "reachml/task.hpp"
#include "reachml/transforms.hpp"

namespace reachml {

struct ExperimentParams {
  int corpus_size = 2000;
  int corpus_scale = 1;  // multiplier for the extended-corpus variant
  int blocks = 20;
  int reaches_per_block = 5;
  int heldout_walks = 20;
  int baseline_episodes = 200;
  int bootstrap_resamples = 1000;
  double test_rotation_deg = 60.0;

  void validate() const {
    if (corpus_size <= 0) throw ConfigError("experiment.corpus_size must be positive");
    if (corpus_scale < 1) throw ConfigError("experiment.corpus_scale must be >= 1");
    if (blocks <= 0) throw ConfigError("experiment.blocks must be positive");
    if (reaches_per_block <= 0) throw ConfigError("experiment.reaches_per_block must be positive");
    if (heldout_walks <= 0) throw ConfigError("experiment.heldout_walks must be positive");
    if (baseline_episodes < 0) throw ConfigError("experiment.baseline_episodes must be >= 0");
    if (bootstrap_resamples <= 0) throw ConfigError("experiment.bootstrap_resamples must be positive");
    if (!(test_rotation_deg > 0.0)) throw ConfigError("experiment.test_rotation_deg must be positive");
  }
};

// Everything a run needs. JSON loading lives in config.hpp.
struct ExperimentConfig {
  std::uint64_t root_seed = 12345;
  int threads = 0;  // 0 = hardware concurrency, 1 = bit-exact single-threaded
  ArmGeometry geometry;
  EpisodeConfig episode;
  SamplerParams sampler;
  int hidden = 100;
  TrainConfig training;
  CemConfig cem;
  ExperimentParams experiment;

  void validate() const {
    if (hidden <= 0) throw ConfigError("network.hidden must be positive");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    geometry.validate();
    episode.validate();
    sampler.validate();
    training.validate();
    cem.validate();
    experiment.validate();
  }
};

inline int effective_threads(int configured) {
  if (configured > 0) return configured;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Index-parallel loop with deterministic output: each index writes only its
// own slot, so results are identical for any thread count.
template <typename F>
void parallel_for(int n, int threads, F&& f) {
  threads = std::min(effective_threads(threads), n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// n random-walk trajectories, one fresh transform and goal each. Streams are
// derived per trajectory, so the walk actions and goals for index i are the
// same for both conditions; only the transform sampler differs.
inline std::vector<Trajectory> generate_corpus(Condition cond, int n, const Rng& corpus_rng,
                                               const ArmGeometry& geom,
                                               const EpisodeConfig& episode,
                                               const SamplerParams& sampler) {
  std::vector<Trajectory> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng trng = corpus_rng.child("transform", static_cast<std::uint64_t>(i));
    Rng grng = corpus_rng.child("goal", static_cast<std::uint64_t>(i));
    Rng wrng = corpus_rng.child("walk", static_cast<std::uint64_t>(i));
    TaskInstance task{sample_condition(cond, trng, sampler), sample_goal(grng, episode),
                      episode, geom};
    out[static_cast<std::size_t>(i)] = random_walk(task, episode.walk_steps, wrng);
  }
  return out;
}

// Held-out random walks under the pure test rotation, alternating sign by
// index, at test length (max_steps).
inline std::vector<Trajectory> generate_heldout_walks(int n, const Rng& rng,
                                                      const ArmGeometry& geom,
                                                      const EpisodeConfig& episode,
                                                      double test_rotation_deg) {
  std::vector<Trajectory> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double rot = (i % 2 == 0 ? 1.0 : -1.0) * test_rotation_deg;
    TransformSpec spec;
    spec.rotation_deg = rot;
    Rng grng = rng.child("goal", static_cast<std::uint64_t>(i));
    Rng wrng = rng.child("walk", static_cast<std::uint64_t>(i));
    TaskInstance task{compose(spec), sample_goal(grng, episode), episode, geom};
    out[static_cast<std::size_t>(i)] = random_walk(task, episode.max_steps, wrng);
  }
  return out;
}

struct BlockResult {
  int sign = 1;  // test-rotation sign for the whole block
  std::vector<TrialMetrics> reaches;
  std::vector<Point2> goals;
};

// One test block: the rotation is held fixed while the goal moves between
// reaches, and the model memory persists across the block's reaches. The
// weights are const throughout; only the memory adapts.
inline BlockResult run_test_block(const ForwardModel& model, int rotation_sign, int n_reaches,
                                  const Rng& block_rng, const ArmGeometry& geom,
                                  const EpisodeConfig& episode, const CemConfig& cem,
                                  double test_rotation_deg = 60.0) {
  BlockResult block;
  block.sign = rotation_sign >= 0 ? 1 : -1;
  TransformSpec spec;
  spec.rotation_deg = block.sign * test_rotation_deg;
  const LinearTransform transform = compose(spec);

  Rng goal_rng = block_rng.child("goal");
  Agent<LearnedModel> agent(LearnedModel{&model}, memory_reset(model.dims().hidden), cem,
                            geom.acc_limit, block_rng.child("cem"));
  for (int reach = 0; reach < n_reaches; ++reach) {
    const Point2 goal = sample_goal(goal_rng, episode);
    Environment env(TaskInstance{transform, goal, episode, geom});
    agent.set_rng(block_rng.child("cem", static_cast<std::uint64_t>(reach)));
    agent.begin_episode();
    std::vector<Point2> cursors{env.current().cursor};
    while (!env.done()) {
      const Observation obs = env.current();
      const Action a = agent.act(obs);
      const StepRecord rec = env.step(a);
      agent.observe_outcome(a, rec.obs);
      cursors.push_back(rec.obs.cursor);
    }
    block.reaches.push_back(compute_metrics(cursors, goal, geom.dt(), episode.goal_radius));
    block.goals.push_back(goal);
  }
  return block;
}

// Uniform-random policy under test conditions; returns one cumulative
// penalty per episode.
inline std::vector<double> random_policy_baseline(int n_episodes, const Rng& rng,
                                                  const ArmGeometry& geom,
                                                  const EpisodeConfig& episode,
                                                  double test_rotation_deg = 60.0) {
  std::vector<double> penalties(static_cast<std::size_t>(n_episodes), 0.0);
  for (int i = 0; i < n_episodes; ++i) {
    TransformSpec spec;
    spec.rotation_deg = (i % 2 == 0 ? 1.0 : -1.0) * test_rotation_deg;
    Rng grng = rng.child("goal", static_cast<std::uint64_t>(i));
    Rng arng = rng.child("actions", static_cast<std::uint64_t>(i));
    Environment env(TaskInstance{compose(spec), sample_goal(grng, episode), episode, geom});
    double penalty = 0.0;
    while (!env.done()) {
      const Action a{arng.uniform(-geom.acc_limit, geom.acc_limit),
                     arng.uniform(-geom.acc_limit, geom.acc_limit)};
      penalty -= env.step(a).reward;
    }
    penalties[static_cast<std::size_t>(i)] = penalty;
  }
  return penalties;
}

struct ConditionResults {
  Condition condition = Condition::Rot;
  std::vector<std::vector<double>> heldout_errors;  // walk x step, cm
  std::vector<BlockResult> blocks;
};

// Held-out evaluation plus the full set of test blocks for one trained
// model. Blocks run in parallel; every stream is derived from the root seed
// and the block index, so results do not depend on the thread count.
inline ConditionResults evaluate_condition(const ForwardModel& model, const ExperimentConfig& cfg) {
  ConditionResults res;
  res.condition = model.meta.condition;
  const Rng root(cfg.root_seed);

  const auto walks = generate_heldout_walks(cfg.experiment.heldout_walks,
                                            root.child("heldout"), cfg.geometry, cfg.episode,
                                            cfg.experiment.test_rotation_deg);
  res.heldout_errors.resize(walks.size());
  for (std::size_t i = 0; i < walks.size(); ++i) {
    res.heldout_errors[i] = eval_model_error(model, walks[i]);
  }

  res.blocks.resize(static_cast<std::size_t>(cfg.experiment.blocks));
  parallel_for(cfg.experiment.blocks, cfg.threads, [&](int b) {
    const int sign = b % 2 == 0 ? 1 : -1;
    res.blocks[static_cast<std::size_t>(b)] = run_test_block(
        model, sign, cfg.experiment.reaches_per_block,
        root.child("test-block", static_cast<std::uint64_t>(b)), cfg.geometry, cfg.episode,
        cfg.cem, cfg.experiment.test_rotation_deg);
  });
  return res;
}

struct ResultsTable {
  ConditionResults rot;
  ConditionResults rotplus;
  std::vector<double> baseline_penalties;
};

inline ResultsTable run_experiment(const ExperimentConfig& cfg, const ForwardModel& rot_model,
                                   const ForwardModel& rotplus_model) {
  ResultsTable table;
  table.rot = evaluate_condition(rot_model, cfg);
  table.rotplus = evaluate_condition(rotplus_model, cfg);
  table.baseline_penalties = random_policy_baseline(
      cfg.experiment.baseline_episodes, Rng(cfg.root_seed).child("baseline"), cfg.geometry,
      cfg.episode, cfg.experiment.test_rotation_deg);
  return table;
}

// ---- aggregation helpers ----

inline std::vector<double> reach_values(const std::vector<BlockResult>& blocks, int reach,
                                        const std::function<double(const TrialMetrics&)>& get) {
  std::vector<double> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) {
    if (reach < static_cast<int>(b.reaches.size())) {
      out.push_back(get(b.reaches[static_cast<std::size_t>(reach)]));
    }
  }
  return out;
}

inline std::vector<Point2> final_positions_of_reach(const std::vector<BlockResult>& blocks,
                                                    int reach) {
  std::vector<Point2> out;
  for (const auto& b : blocks) {
    if (reach < static_cast<int>(b.reaches.size())) {
      const auto& m = b.reaches[static_cast<std::size_t>(reach)];
      // normalized so goals and rotation signs line up across blocks
      const auto norm = normalize_trajectory({m.trajectory.back()}, static_cast<double>(b.sign),
                                             b.goals[static_cast<std::size_t>(reach)]);
      out.push_back(norm.front());
    }
  }
  return out;
}

inline std::vector<double> mean_error_curve(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) return {};
  std::vector<double> mean(curves.front().size(), 0.0);
  for (const auto& c : curves) {
    for (std::size_t t = 0; t < mean.size(); ++t) mean[t] += c[t];
  }
  for (auto& v : mean) v /= static_cast<double>(curves.size());
  return mean;
}

}  // namespace reachml
