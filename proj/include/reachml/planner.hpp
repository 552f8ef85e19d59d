#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <vector>

#include "reachml/arm.hpp"
#include "reachml/common.hpp"
#include "reachml/rng.hpp"
#include "reachml/task.hpp"

namespace reachml {

// Sampling distribution over open-loop action sequences, one row per step.
struct PlanDistribution {
  Eigen::MatrixXd mean;    // horizon x 2
  Eigen::MatrixXd stddev;  // horizon x 2, floored at min_stddev
};

struct CemConfig {
  int population = 128;
  int elite_count = 16;
  int iterations = 8;
  int horizon = 14;          // receding, 1 s at 14 steps/s
  double init_stddev = 10.0;
  double min_stddev = 0.4;

  void validate() const {
    if (population < 1) throw ConfigError("cem.population must be >= 1");
    if (elite_count < 1 || elite_count > population) {
      throw ConfigError("cem.elite_count must be in [1, population]");
    }
    if (iterations < 1) throw ConfigError("cem.iterations must be >= 1");
    if (horizon < 1) throw ConfigError("cem.horizon must be >= 1");
    if (!(init_stddev > 0.0) || !(min_stddev > 0.0)) {
      throw ConfigError("cem stddevs must be positive");
    }
  }
};

inline PlanDistribution fresh_distribution(const CemConfig& cfg) {
  return {Eigen::MatrixXd::Zero(cfg.horizon, 2),
          Eigen::MatrixXd::Constant(cfg.horizon, 2, cfg.init_stddev)};
}

// Shift the mean one step left (repeating the last row) and reset the
// stddev, so replanning explores around the tail of the previous solution.
inline PlanDistribution warm_start(const PlanDistribution& prev, const CemConfig& cfg) {
  PlanDistribution d;
  const auto n = prev.mean.rows();
  d.mean.resize(n, 2);
  if (n > 1) d.mean.topRows(n - 1) = prev.mean.bottomRows(n - 1);
  d.mean.row(n - 1) = prev.mean.row(n - 1);
  d.stddev = Eigen::MatrixXd::Constant(n, 2, cfg.init_stddev);
  return d;
}

struct CemResult {
  std::vector<Action> best;  // best-scoring sequence seen across iterations
  double best_score = -std::numeric_limits<double>::infinity();
  PlanDistribution dist;     // final refit distribution
  std::vector<double> iteration_best;        // best-so-far after each iteration
  std::vector<double> iteration_elite_mean;  // mean elite score per iteration
};

// Cross-entropy optimization over action sequences. Samples are clamped to
// the action box, scored with one batched model rollout per iteration, and
// the distribution is refit to the elite set (stddev floored). Noise draw
// order: member, then step, then (shoulder, elbow).
template <typename Model>
CemResult cem_plan(const Model& model, const typename Model::Memory& mem,
                   const Observation& obs, const PlanDistribution& init,
                   const CemConfig& cfg, double act_limit, Rng& rng,
                   std::ostream* trace = nullptr) {
  cfg.validate();
  if (init.mean.rows() != cfg.horizon) {
    throw std::invalid_argument("cem_plan: distribution horizon mismatch");
  }
  PlanDistribution dist = init;
  const int P = cfg.population;
  const int T = cfg.horizon;

  std::vector<Eigen::MatrixXd> samples(P);  // each T x 2
  std::vector<Eigen::Matrix2Xd> steps(T, Eigen::Matrix2Xd(2, P));
  CemResult result;

  for (int it = 0; it < cfg.iterations; ++it) {
    for (int p = 0; p < P; ++p) {
      Eigen::MatrixXd s(T, 2);
      for (int t = 0; t < T; ++t) {
        s(t, 0) = clamp(dist.mean(t, 0) + dist.stddev(t, 0) * rng.normal(), -act_limit, act_limit);
        s(t, 1) = clamp(dist.mean(t, 1) + dist.stddev(t, 1) * rng.normal(), -act_limit, act_limit);
      }
      for (int t = 0; t < T; ++t) {
        steps[t](0, p) = s(t, 0);
        steps[t](1, p) = s(t, 1);
      }
      samples[p] = std::move(s);
    }
    const Eigen::VectorXd scores = model.score_sequences(mem, obs, steps);

    std::vector<int> idx(P);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&scores](int a, int b) { return scores(a) > scores(b); });

    if (scores(idx[0]) > result.best_score) {
      result.best_score = scores(idx[0]);
      const auto& s = samples[idx[0]];
      result.best.assign(T, Action{});
      for (int t = 0; t < T; ++t) result.best[t] = {s(t, 0), s(t, 1)};
    }

    Eigen::MatrixXd emean = Eigen::MatrixXd::Zero(T, 2);
    double elite_score_sum = 0.0;
    for (int e = 0; e < cfg.elite_count; ++e) {
      emean += samples[idx[e]];
      elite_score_sum += scores(idx[e]);
    }
    emean /= cfg.elite_count;
    Eigen::MatrixXd evar = Eigen::MatrixXd::Zero(T, 2);
    for (int e = 0; e < cfg.elite_count; ++e) {
      evar += (samples[idx[e]] - emean).cwiseAbs2();
    }
    evar /= cfg.elite_count;
    dist.mean = emean.cwiseMax(-act_limit).cwiseMin(act_limit);
    dist.stddev = evar.cwiseSqrt().cwiseMax(cfg.min_stddev);

    result.iteration_best.push_back(result.best_score);
    result.iteration_elite_mean.push_back(elite_score_sum / cfg.elite_count);
    if (trace) {
      *trace << it << ',' << result.best_score << ','
             << elite_score_sum / cfg.elite_count << '\n';
    }
  }
  result.dist = std::move(dist);
  return result;
}

// Receding-horizon controller: plans from scratch on the first step of a
// reach, warm-starts afterwards, executes the first action of the refit
// plan, and advances the model memory with each realized outcome.
template <typename Model>
class Agent {
 public:
  Agent(Model model, typename Model::Memory memory, CemConfig cfg, double act_limit,
        Rng rng)
      : model_(std::move(model)),
        mem_(std::move(memory)),
        cfg_(cfg),
        act_limit_(act_limit),
        rng_(rng) {}

  // Called at the start of each reach; planning restarts from scratch while
  // the memory carries over.
  void begin_episode() { prev_.reset(); }

  Action act(const Observation& obs, std::ostream* trace = nullptr) {
    const PlanDistribution start = prev_ ? warm_start(*prev_, cfg_) : fresh_distribution(cfg_);
    CemResult r = cem_plan(model_, mem_, obs, start, cfg_, act_limit_, rng_, trace);
    prev_ = r.dist;
    pending_obs_ = obs;
    return {r.dist.mean(0, 0), r.dist.mean(0, 1)};
  }

  // Feed back the executed action's realized outcome.
  void observe_outcome(const Action& executed, const Observation& next_obs) {
    mem_ = model_.advance(mem_, pending_obs_, executed, next_obs);
  }

  const typename Model::Memory& memory() const { return mem_; }
  void set_memory(typename Model::Memory m) { mem_ = std::move(m); }
  void set_rng(Rng rng) { rng_ = rng; }
  const Model& model() const { return model_; }

 private:
  Model model_;
  typename Model::Memory mem_;
  CemConfig cfg_;
  double act_limit_;
  Rng rng_;
  std::optional<PlanDistribution> prev_;
  Observation pending_obs_;
};

}  // namespace reachml
