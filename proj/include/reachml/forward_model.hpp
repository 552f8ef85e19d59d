#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "reachml/common.hpp"
#include "reachml/neural.hpp"
#include "reachml/task.hpp"

namespace reachml {

// Fixed divisors applied to network inputs and targets; stored with the
// weights so a checkpoint is self-describing.
struct NormConstants {
  double pos_cm = 10.0;  // cursor, goal, and cursor-delta targets
  double act = 20.0;     // actions (the acceleration limit)
};

struct ModelMeta {
  Condition condition = Condition::Rot;
  std::uint32_t corpus_size = 0;
  std::uint64_t seed = 0;
};

// The adaptive internal model: frozen weights after training, with all
// task-tracking state held in a separate ModelMemory value.
struct ForwardModel {
  WeightSet weights;
  NormConstants norm;
  ModelMeta meta;

  NetDims dims() const { return weights.dims(); }
};

// The model's persistent memory: recurrent state plus the most recent real
// observation, so planning rollouts can branch without re-querying the
// environment. Plain value semantics; copies are fully independent.
struct ModelMemory {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
  Observation last_obs;

  bool operator==(const ModelMemory& o) const {
    return h == o.h && c == o.c && last_obs == o.last_obs;
  }
};

inline ModelMemory memory_reset(int hidden) {
  return {Eigen::VectorXd::Zero(hidden), Eigen::VectorXd::Zero(hidden), Observation{}};
}

inline Eigen::VectorXd model_input(const Observation& obs, const Action& a,
                                   const NormConstants& n) {
  Eigen::VectorXd x(6);
  x << obs.cursor.x() / n.pos_cm, obs.cursor.y() / n.pos_cm,
      obs.goal.x() / n.pos_cm, obs.goal.y() / n.pos_cm,
      a.shoulder_acc / n.act, a.elbow_acc / n.act;
  return x;
}

struct ModelPrediction {
  ModelMemory mem;
  Point2 next_cursor = Point2::Zero();
  double reward = 0.0;
};

// Advances the memory with (obs, action) and predicts the next cursor as
// obs.cursor plus the denormalized delta. The reward is computed from the
// predicted cursor and the goal, never predicted by the network.
inline ModelPrediction model_observe(const ForwardModel& fm, const ModelMemory& mem,
                                     const Observation& obs, const Action& a) {
  const auto out = forward_pass(fm.weights, model_input(obs, a, fm.norm), mem.h, mem.c);
  ModelPrediction pred;
  pred.next_cursor = obs.cursor + Point2(out.prediction(0), out.prediction(1)) * fm.norm.pos_cm;
  pred.reward = -(pred.next_cursor - obs.goal).norm();
  pred.mem = {out.h, out.c, Observation{pred.next_cursor, obs.goal}};
  return pred;
}

// Open-loop rollout: each predicted observation feeds the next step. The
// caller's memory snapshot is never touched.
inline double simulate(const ForwardModel& fm, const ModelMemory& snapshot,
                       const Observation& start_obs, const std::vector<Action>& actions) {
  ModelMemory mem = snapshot;
  Observation obs = start_obs;
  double total = 0.0;
  for (const Action& a : actions) {
    ModelPrediction pred = model_observe(fm, mem, obs, a);
    total += pred.reward;
    mem = std::move(pred.mem);
    obs = mem.last_obs;
  }
  return total;
}

// Scores a population of action sequences in one batched rollout.
// steps[t] holds the population's actions at step t, one column per member
// (row 0 shoulder, row 1 elbow). Matches simulate() column by column.
inline Eigen::VectorXd simulate_batch(const ForwardModel& fm, const ModelMemory& snapshot,
                                      const Observation& start_obs,
                                      const std::vector<Eigen::Matrix2Xd>& steps) {
  if (steps.empty()) return Eigen::VectorXd();
  const int P = static_cast<int>(steps.front().cols());
  const int H = static_cast<int>(snapshot.h.size());
  Eigen::MatrixXd h = snapshot.h.replicate(1, P);
  Eigen::MatrixXd c = snapshot.c.replicate(1, P);
  Eigen::Matrix2Xd cursor = start_obs.cursor.replicate(1, P);
  const Point2 goal = start_obs.goal;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(P);
  Eigen::MatrixXd x(6, P), y;
  for (const auto& acts : steps) {
    x.topRows(2) = cursor / fm.norm.pos_cm;
    x.row(2).setConstant(goal.x() / fm.norm.pos_cm);
    x.row(3).setConstant(goal.y() / fm.norm.pos_cm);
    x.bottomRows(2) = acts / fm.norm.act;
    detail::forward_step(fm.weights, x, h, c, &y, nullptr);
    cursor += y * fm.norm.pos_cm;
    total -= (cursor.colwise() - goal).colwise().norm().transpose();
  }
  return total;
}

// Planner-facing adapter for the learned model.
struct LearnedModel {
  using Memory = ModelMemory;

  const ForwardModel* fm = nullptr;

  Eigen::VectorXd score_sequences(const Memory& mem, const Observation& obs,
                                  const std::vector<Eigen::Matrix2Xd>& steps) const {
    return simulate_batch(*fm, mem, obs, steps);
  }

  // Real-time update: the recurrent state consumes the executed action with
  // the observation it was taken from, and the realized outcome becomes the
  // new last_obs.
  Memory advance(const Memory& mem, const Observation& obs, const Action& a,
                 const Observation& real_next) const {
    ModelPrediction pred = model_observe(*fm, mem, obs, a);
    pred.mem.last_obs = real_next;
    return pred.mem;
  }
};

// Ground-truth stand-in for the learned model: rolls the actual arm dynamics
// and transform. Its "memory" is the true arm state.
struct OracleArmModel {
  using Memory = ArmState;

  TaskInstance task;
  Point2 p0 = Point2::Zero();

  explicit OracleArmModel(TaskInstance t)
      : task(std::move(t)), p0(tip_position(initial_state(task.geom), task.geom)) {}

  Eigen::VectorXd score_sequences(const Memory& arm, const Observation& obs,
                                  const std::vector<Eigen::Matrix2Xd>& steps) const {
    const int P = steps.empty() ? 0 : static_cast<int>(steps.front().cols());
    Eigen::VectorXd total = Eigen::VectorXd::Zero(P);
    for (int p = 0; p < P; ++p) {
      ArmState s = arm;
      for (const auto& acts : steps) {
        s = step_arm(s, Action{acts(0, p), acts(1, p)}, task.geom);
        total(p) -= (cursor_of(s, task.transform, p0, task.geom) - obs.goal).norm();
      }
    }
    return total;
  }

  Memory advance(const Memory& arm, const Observation&, const Action& a,
                 const Observation&) const {
    return step_arm(arm, clamp_action(a, task.geom), task.geom);
  }
};

inline TrainSequence sequence_from_trajectory(const Trajectory& tr, const NormConstants& n) {
  const int T = tr.steps();
  TrainSequence seq;
  seq.inputs.resize(6, T);
  seq.targets.resize(2, T);
  for (int t = 0; t < T; ++t) {
    seq.inputs(0, t) = tr.cursors[t].x() / n.pos_cm;
    seq.inputs(1, t) = tr.cursors[t].y() / n.pos_cm;
    seq.inputs(2, t) = tr.goal.x() / n.pos_cm;
    seq.inputs(3, t) = tr.goal.y() / n.pos_cm;
    seq.inputs(4, t) = tr.actions[t].shoulder_acc / n.act;
    seq.inputs(5, t) = tr.actions[t].elbow_acc / n.act;
    seq.targets.col(t) = (tr.cursors[t + 1] - tr.cursors[t]) / n.pos_cm;
  }
  return seq;
}

// Mean Euclidean prediction error per step, in cm, teacher-forced over the
// whole corpus.
inline double corpus_cm_error(const WeightSet& w, const std::vector<TrainSequence>& seqs,
                              double norm_pos) {
  const auto p = detail::pack_batch(seqs);
  const int H = static_cast<int>(w.lstm_wh.cols());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(H, p.batch);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(H, p.batch);
  Eigen::MatrixXd y;
  double sum = 0.0;
  for (int t = 0; t < p.steps; ++t) {
    detail::forward_step(w, p.x[t], h, c, &y, nullptr);
    sum += (y - p.tgt[t]).colwise().norm().sum();
  }
  return sum * norm_pos / (static_cast<double>(p.steps) * p.batch);
}

struct TrainReport {
  std::vector<double> epoch_loss;  // normalized MSE, averaged over the epoch
  double final_cm_error = 0.0;     // per-step cm error on the training set
  int epochs_run = 0;
};

// Trains on random-walk trajectories with BPTT from zeroed memory per
// trajectory. Single-threaded and bit-reproducible for a fixed seed.
inline std::pair<ForwardModel, TrainReport> train_model(
    const std::vector<Trajectory>& corpus, int hidden, const TrainConfig& cfg,
    double norm_act, std::uint64_t seed, ModelMeta meta = {}) {
  if (corpus.empty()) throw MissingInputError("empty corpus");
  cfg.validate();

  NormConstants norm{cfg.norm_pos_cm, norm_act};
  std::vector<TrainSequence> seqs;
  seqs.reserve(corpus.size());
  for (const auto& tr : corpus) seqs.push_back(sequence_from_trajectory(tr, norm));

  const NetDims dims{6, hidden, 2};
  Rng root(seed);
  Rng init_rng = root.child("weight-init");
  WeightSet w = WeightSet::init(dims, init_rng);
  OptimizerState opt = OptimizerState::zeros(dims);

  TrainReport report;
  double best = std::numeric_limits<double>::infinity();
  int since_improved = 0;
  std::vector<int> order(seqs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = root.child("batch-shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t count = 0;
    std::vector<TrainSequence> batch;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), at + cfg.batch_size);
      for (std::size_t i = at; i < end; ++i) batch.push_back(seqs[order[i]]);
      auto [grads, loss] = bptt_gradients(w, batch);
      optimizer_update(w, std::move(grads), opt, cfg);
      loss_sum += loss * static_cast<double>(batch.size());
      count += batch.size();
    }
    const double epoch_loss = loss_sum / static_cast<double>(count);
    report.epoch_loss.push_back(epoch_loss);
    report.epochs_run = epoch + 1;
    if (epoch_loss < best * (1.0 - cfg.plateau_tol)) {
      best = epoch_loss;
      since_improved = 0;
    } else if (++since_improved >= cfg.plateau_patience) {
      break;
    }
  }

  meta.corpus_size = static_cast<std::uint32_t>(corpus.size());
  meta.seed = seed;
  ForwardModel fm{std::move(w), norm, meta};
  report.final_cm_error = corpus_cm_error(fm.weights, seqs, norm.pos_cm);
  return {std::move(fm), std::move(report)};
}

// Per-step prediction error along a held-out trajectory, memory warm-started
// only by the trajectory itself. Entry 0 is the error with zeroed memory.
inline std::vector<double> eval_model_error(const ForwardModel& fm, const Trajectory& tr) {
  std::vector<double> errors;
  errors.reserve(tr.steps());
  ModelMemory mem = memory_reset(fm.dims().hidden);
  for (int t = 0; t < tr.steps(); ++t) {
    const Observation obs{tr.cursors[t], tr.goal};
    ModelPrediction pred = model_observe(fm, mem, obs, tr.actions[t]);
    errors.push_back((pred.next_cursor - tr.cursors[t + 1]).norm());
    pred.mem.last_obs = Observation{tr.cursors[t + 1], tr.goal};  // teacher forcing
    mem = std::move(pred.mem);
  }
  return errors;
}

// Mean open-loop rollout error by depth k (1..max_k), over every viable
// start index of the trajectory.
inline std::vector<double> kstep_rollout_error(const ForwardModel& fm, const Trajectory& tr,
                                               int max_k) {
  const int T = tr.steps();
  std::vector<ModelMemory> prefix;
  prefix.reserve(T);
  prefix.push_back(memory_reset(fm.dims().hidden));
  for (int t = 0; t + 1 < T; ++t) {
    ModelPrediction pred =
        model_observe(fm, prefix.back(), Observation{tr.cursors[t], tr.goal}, tr.actions[t]);
    pred.mem.last_obs = Observation{tr.cursors[t + 1], tr.goal};
    prefix.push_back(std::move(pred.mem));
  }
  std::vector<double> sum(max_k, 0.0);
  std::vector<int> n(max_k, 0);
  for (int t = 0; t < T; ++t) {
    ModelMemory mem = prefix[t];
    Observation obs{tr.cursors[t], tr.goal};
    for (int j = 0; j < max_k && t + j < T; ++j) {
      ModelPrediction pred = model_observe(fm, mem, obs, tr.actions[t + j]);
      sum[j] += (pred.next_cursor - tr.cursors[t + j + 1]).norm();
      n[j] += 1;
      mem = std::move(pred.mem);
      obs = mem.last_obs;
    }
  }
  std::vector<double> mean(max_k, 0.0);
  for (int k = 0; k < max_k; ++k) mean[k] = n[k] > 0 ? sum[k] / n[k] : 0.0;
  return mean;
}

}  // namespace reachml
