#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "reachml/common.hpp"
#include "reachml/rng.hpp"

namespace reachml {

struct NetDims {
  int input = 6;
  int hidden = 100;
  int output = 2;
};

// One LSTM layer (gate order i, f, g, o) followed by two ReLU layers and a
// linear head. Biases are stored as single-column matrices so every tensor
// can be visited uniformly.
struct WeightSet {
  Eigen::MatrixXd lstm_wx;  // 4H x I
  Eigen::MatrixXd lstm_wh;  // 4H x H
  Eigen::MatrixXd lstm_b;   // 4H x 1
  Eigen::MatrixXd fc1_w;    // H x H
  Eigen::MatrixXd fc1_b;    // H x 1
  Eigen::MatrixXd fc2_w;    // H x H
  Eigen::MatrixXd fc2_b;    // H x 1
  Eigen::MatrixXd head_w;   // O x H
  Eigen::MatrixXd head_b;   // O x 1

  NetDims dims() const {
    return {static_cast<int>(lstm_wx.cols()),
            static_cast<int>(lstm_wh.cols()),
            static_cast<int>(head_w.rows())};
  }

  static WeightSet zeros(const NetDims& d) {
    WeightSet w;
    w.lstm_wx = Eigen::MatrixXd::Zero(4 * d.hidden, d.input);
    w.lstm_wh = Eigen::MatrixXd::Zero(4 * d.hidden, d.hidden);
    w.lstm_b = Eigen::MatrixXd::Zero(4 * d.hidden, 1);
    w.fc1_w = Eigen::MatrixXd::Zero(d.hidden, d.hidden);
    w.fc1_b = Eigen::MatrixXd::Zero(d.hidden, 1);
    w.fc2_w = Eigen::MatrixXd::Zero(d.hidden, d.hidden);
    w.fc2_b = Eigen::MatrixXd::Zero(d.hidden, 1);
    w.head_w = Eigen::MatrixXd::Zero(d.output, d.hidden);
    w.head_b = Eigen::MatrixXd::Zero(d.output, 1);
    return w;
  }

  // Uniform +-1/sqrt(fan_in) for weight matrices (column-major fill order),
  // zero biases, forget-gate bias +1.
  static WeightSet init(const NetDims& d, Rng& rng) {
    WeightSet w = zeros(d);
    auto fill = [&rng](Eigen::MatrixXd& m) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
      double* p = m.data();
      for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = rng.uniform(-bound, bound);
    };
    fill(w.lstm_wx);
    fill(w.lstm_wh);
    fill(w.fc1_w);
    fill(w.fc2_w);
    fill(w.head_w);
    w.lstm_b.block(d.hidden, 0, d.hidden, 1).setConstant(1.0);
    return w;
  }
};

using Gradients = WeightSet;

template <typename W, typename F>
void for_each_tensor(W& w, F&& f) {
  f("lstm_wx", w.lstm_wx);
  f("lstm_wh", w.lstm_wh);
  f("lstm_b", w.lstm_b);
  f("fc1_w", w.fc1_w);
  f("fc1_b", w.fc1_b);
  f("fc2_w", w.fc2_w);
  f("fc2_b", w.fc2_b);
  f("head_w", w.head_w);
  f("head_b", w.head_b);
}

template <typename A, typename B, typename F>
void for_each_tensor_pair(A& a, B& b, F&& f) {
  f(a.lstm_wx, b.lstm_wx);
  f(a.lstm_wh, b.lstm_wh);
  f(a.lstm_b, b.lstm_b);
  f(a.fc1_w, b.fc1_w);
  f(a.fc1_b, b.fc1_b);
  f(a.fc2_w, b.fc2_w);
  f(a.fc2_b, b.fc2_b);
  f(a.head_w, b.head_w);
  f(a.head_b, b.head_b);
}

inline std::uint64_t weights_checksum(const WeightSet& w) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for_each_tensor(w, [&h](const char*, const Eigen::MatrixXd& m) {
    h = fnv1a64(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), h);
  });
  return h;
}

namespace detail {

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

// Per-step activations kept for backpropagation.
struct StepCache {
  Eigen::MatrixXd x, h_prev, c_prev;
  Eigen::MatrixXd gi, gf, gg, go, c, tc;
  Eigen::MatrixXd r1, r2, y;
};

// Advances (h, c) in place for a batch of columns; optionally fills the head
// output and the cache.
inline void forward_step(const WeightSet& w, const Eigen::MatrixXd& x,
                         Eigen::MatrixXd& h, Eigen::MatrixXd& c,
                         Eigen::MatrixXd* y_out, StepCache* cache) {
  const int H = static_cast<int>(w.lstm_wh.cols());
  Eigen::MatrixXd z = w.lstm_wx * x + w.lstm_wh * h;
  z.colwise() += w.lstm_b.col(0);
  Eigen::MatrixXd gi = sigmoid(z.topRows(H));
  Eigen::MatrixXd gf = sigmoid(z.middleRows(H, H));
  Eigen::MatrixXd gg = z.middleRows(2 * H, H).array().tanh().matrix();
  Eigen::MatrixXd go = sigmoid(z.bottomRows(H));
  if (cache) {
    cache->x = x;
    cache->h_prev = h;
    cache->c_prev = c;
  }
  c = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
  Eigen::MatrixXd tc = c.array().tanh().matrix();
  h = go.cwiseProduct(tc);
  Eigen::MatrixXd r1, r2;
  if (y_out != nullptr || cache != nullptr) {
    r1 = ((w.fc1_w * h).colwise() + w.fc1_b.col(0)).cwiseMax(0.0);
    r2 = ((w.fc2_w * r1).colwise() + w.fc2_b.col(0)).cwiseMax(0.0);
    Eigen::MatrixXd y = (w.head_w * r2).colwise() + w.head_b.col(0);
    if (y_out) *y_out = y;
    if (cache) {
      cache->gi = std::move(gi);
      cache->gf = std::move(gf);
      cache->gg = std::move(gg);
      cache->go = std::move(go);
      cache->c = c;
      cache->tc = std::move(tc);
      cache->r1 = std::move(r1);
      cache->r2 = std::move(r2);
      cache->y = std::move(y);
    }
  }
}

}  // namespace detail

// Standard LSTM cell update for a single step.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> lstm_step(
    const WeightSet& w, const Eigen::VectorXd& input,
    const Eigen::VectorXd& h, const Eigen::VectorXd& c) {
  if (input.size() != w.lstm_wx.cols() || h.size() != w.lstm_wh.cols() ||
      c.size() != w.lstm_wh.cols()) {
    throw std::invalid_argument("lstm_step: shape mismatch");
  }
  Eigen::MatrixXd hm = h, cm = c;
  detail::forward_step(w, input, hm, cm, nullptr, nullptr);
  return {hm.col(0), cm.col(0)};
}

// Full stack: LSTM -> fc1 ReLU -> fc2 ReLU -> linear head.
struct ForwardResult {
  Eigen::VectorXd prediction;
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

inline ForwardResult forward_pass(const WeightSet& w, const Eigen::VectorXd& input,
                                  const Eigen::VectorXd& h, const Eigen::VectorXd& c) {
  if (input.size() != w.lstm_wx.cols() || h.size() != w.lstm_wh.cols() ||
      c.size() != w.lstm_wh.cols()) {
    throw std::invalid_argument("forward_pass: shape mismatch");
  }
  Eigen::MatrixXd hm = h, cm = c, y;
  detail::forward_step(w, input, hm, cm, &y, nullptr);
  return {y.col(0), hm.col(0), cm.col(0)};
}

// One training sequence: inputs (I x T) and per-step targets (O x T).
// Recurrent state starts at zero for every sequence.
struct TrainSequence {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;

  int steps() const { return static_cast<int>(inputs.cols()); }
};

namespace detail {

// Packs equal-length sequences into per-step column batches.
struct PackedBatch {
  std::vector<Eigen::MatrixXd> x;    // T of (I x B)
  std::vector<Eigen::MatrixXd> tgt;  // T of (O x B)
  int steps = 0;
  int batch = 0;
};

inline PackedBatch pack_batch(const std::vector<TrainSequence>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  PackedBatch p;
  p.steps = batch.front().steps();
  p.batch = static_cast<int>(batch.size());
  const auto in_rows = batch.front().inputs.rows();
  const auto out_rows = batch.front().targets.rows();
  for (const auto& seq : batch) {
    if (seq.steps() != p.steps || seq.inputs.rows() != in_rows ||
        seq.targets.rows() != out_rows || seq.targets.cols() != seq.inputs.cols()) {
      throw std::invalid_argument("batch sequences must share shape");
    }
  }
  p.x.resize(p.steps);
  p.tgt.resize(p.steps);
  for (int t = 0; t < p.steps; ++t) {
    p.x[t].resize(in_rows, p.batch);
    p.tgt[t].resize(out_rows, p.batch);
    for (int b = 0; b < p.batch; ++b) {
      p.x[t].col(b) = batch[b].inputs.col(t);
      p.tgt[t].col(b) = batch[b].targets.col(t);
    }
  }
  return p;
}

}  // namespace detail

// Mean over steps and sequences of the squared prediction error norm.
inline double compute_loss(const WeightSet& w, const std::vector<TrainSequence>& batch) {
  const auto p = detail::pack_batch(batch);
  const int H = static_cast<int>(w.lstm_wh.cols());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(H, p.batch);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(H, p.batch);
  double sum = 0.0;
  Eigen::MatrixXd y;
  for (int t = 0; t < p.steps; ++t) {
    detail::forward_step(w, p.x[t], h, c, &y, nullptr);
    sum += (y - p.tgt[t]).squaredNorm();
  }
  return sum / (static_cast<double>(p.steps) * p.batch);
}

// Exact reverse-mode gradients of compute_loss, unrolled over the full
// sequence length. Also returns the loss.
inline std::pair<Gradients, double> bptt_gradients(const WeightSet& w,
                                                   const std::vector<TrainSequence>& batch) {
  const auto p = detail::pack_batch(batch);
  const int H = static_cast<int>(w.lstm_wh.cols());
  const int T = p.steps;
  const double scale = 1.0 / (static_cast<double>(T) * p.batch);

  std::vector<detail::StepCache> caches(T);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(H, p.batch);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(H, p.batch);
  double loss = 0.0;
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd y;
    detail::forward_step(w, p.x[t], h, c, &y, &caches[t]);
    loss += scale * (y - p.tgt[t]).squaredNorm();
  }

  Gradients g = WeightSet::zeros(w.dims());
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(H, p.batch);
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(H, p.batch);
  for (int t = T - 1; t >= 0; --t) {
    const auto& cc = caches[t];
    const Eigen::MatrixXd dy = 2.0 * scale * (cc.y - p.tgt[t]);
    g.head_w += dy * cc.r2.transpose();
    g.head_b.col(0) += dy.rowwise().sum();
    Eigen::MatrixXd dr2 = w.head_w.transpose() * dy;
    const Eigen::MatrixXd da2 =
        dr2.cwiseProduct((cc.r2.array() > 0.0).cast<double>().matrix());
    g.fc2_w += da2 * cc.r1.transpose();
    g.fc2_b.col(0) += da2.rowwise().sum();
    Eigen::MatrixXd dr1 = w.fc2_w.transpose() * da2;
    const Eigen::MatrixXd da1 =
        dr1.cwiseProduct((cc.r1.array() > 0.0).cast<double>().matrix());
    g.fc1_w += da1 * (cc.go.cwiseProduct(cc.tc)).transpose();  // fc1 input is h_t
    g.fc1_b.col(0) += da1.rowwise().sum();
    dh += w.fc1_w.transpose() * da1;

    const Eigen::MatrixXd d_go = dh.cwiseProduct(cc.tc);
    const Eigen::MatrixXd d_tc = dh.cwiseProduct(cc.go);
    dc += d_tc.cwiseProduct((1.0 - cc.tc.array().square()).matrix());

    const Eigen::MatrixXd d_gf = dc.cwiseProduct(cc.c_prev);
    const Eigen::MatrixXd d_gi = dc.cwiseProduct(cc.gg);
    const Eigen::MatrixXd d_gg = dc.cwiseProduct(cc.gi);
    const Eigen::MatrixXd dc_prev = dc.cwiseProduct(cc.gf);

    const int B = p.batch;
    Eigen::MatrixXd dz(4 * H, B);
    dz.topRows(H) = d_gi.cwiseProduct(cc.gi.cwiseProduct(
        (1.0 - cc.gi.array()).matrix()));
    dz.middleRows(H, H) = d_gf.cwiseProduct(cc.gf.cwiseProduct(
        (1.0 - cc.gf.array()).matrix()));
    dz.middleRows(2 * H, H) =
        d_gg.cwiseProduct((1.0 - cc.gg.array().square()).matrix());
    dz.bottomRows(H) = d_go.cwiseProduct(cc.go.cwiseProduct(
        (1.0 - cc.go.array()).matrix()));

    g.lstm_wx += dz * cc.x.transpose();
    g.lstm_wh += dz * cc.h_prev.transpose();
    g.lstm_b.col(0) += dz.rowwise().sum();

    dh = w.lstm_wh.transpose() * dz;
    dc = dc_prev;
  }
  return {std::move(g), loss};
}

// Central finite differences over every parameter. Intended for small nets.
inline Gradients numeric_gradients(const WeightSet& w,
                                   const std::vector<TrainSequence>& batch,
                                   double step = 1e-5) {
  WeightSet probe = w;
  Gradients g = WeightSet::zeros(w.dims());
  for_each_tensor_pair(probe, g, [&](Eigen::MatrixXd& pm, Eigen::MatrixXd& gm) {
    for (Eigen::Index i = 0; i < pm.size(); ++i) {
      const double saved = pm.data()[i];
      pm.data()[i] = saved + step;
      const double up = compute_loss(probe, batch);
      pm.data()[i] = saved - step;
      const double down = compute_loss(probe, batch);
      pm.data()[i] = saved;
      gm.data()[i] = (up - down) / (2.0 * step);
    }
  });
  return g;
}

inline double max_rel_error(const Gradients& a, const Gradients& b) {
  double worst = 0.0;
  for_each_tensor_pair(a, b, [&worst](const Eigen::MatrixXd& ma, const Eigen::MatrixXd& mb) {
    for (Eigen::Index i = 0; i < ma.size(); ++i) {
      const double x = ma.data()[i], y = mb.data()[i];
      const double denom = std::max({std::abs(x), std::abs(y), 1e-8});
      worst = std::max(worst, std::abs(x - y) / denom);
    }
  });
  return worst;
}

// Max relative disagreement between backprop and finite differences.
inline double finite_diff_check(const WeightSet& w,
                                const std::vector<TrainSequence>& batch,
                                double step = 1e-5) {
  return max_rel_error(bptt_gradients(w, batch).first,
                       numeric_gradients(w, batch, step));
}

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  int batch_size = 32;
  int epochs = 40;
  int plateau_patience = 5;     // epochs without improvement before stopping
  double plateau_tol = 1e-3;    // relative improvement that counts
  double norm_pos_cm = 10.0;    // cursor/goal normalization divisor

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("training.learning_rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw ConfigError("training.beta1/beta2 must be in (0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("training.epsilon must be positive");
    if (!(clip_norm > 0.0)) throw ConfigError("training.clip_norm must be positive");
    if (batch_size <= 0) throw ConfigError("training.batch_size must be positive");
    if (epochs <= 0) throw ConfigError("training.epochs must be positive");
    if (plateau_patience <= 0) throw ConfigError("training.plateau_patience must be positive");
    if (!(plateau_tol >= 0.0)) throw ConfigError("training.plateau_tol must be non-negative");
    if (!(norm_pos_cm > 0.0)) throw ConfigError("training.norm_pos_cm must be positive");
  }
};

struct OptimizerState {
  WeightSet m;
  WeightSet v;
  long step = 0;

  static OptimizerState zeros(const NetDims& d) {
    return {WeightSet::zeros(d), WeightSet::zeros(d), 0};
  }
};

// Scales gradients so the global norm is at most clip_norm; returns the
// factor applied.
inline double clip_gradients(Gradients& g, double clip_norm) {
  double sq = 0.0;
  for_each_tensor(g, [&sq](const char*, const Eigen::MatrixXd& m) { sq += m.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (norm <= clip_norm || norm == 0.0) return 1.0;
  const double scale = clip_norm / norm;
  for_each_tensor(g, [scale](const char*, Eigen::MatrixXd& m) { m *= scale; });
  return scale;
}

// Bias-corrected adaptive-moment update, applied after global-norm clipping.
inline void optimizer_update(WeightSet& w, Gradients grads, OptimizerState& st,
                             const TrainConfig& cfg) {
  clip_gradients(grads, cfg.clip_norm);
  st.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  auto upd = [&](Eigen::MatrixXd& wm, const Eigen::MatrixXd& gm,
                 Eigen::MatrixXd& mm, Eigen::MatrixXd& vm) {
    mm = cfg.beta1 * mm + (1.0 - cfg.beta1) * gm;
    vm = cfg.beta2 * vm + (1.0 - cfg.beta2) * gm.cwiseProduct(gm);
    const Eigen::ArrayXXd mhat = mm.array() / bc1;
    const Eigen::ArrayXXd vhat = vm.array() / bc2;
    wm.array() -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
  };
  upd(w.lstm_wx, grads.lstm_wx, st.m.lstm_wx, st.v.lstm_wx);
  upd(w.lstm_wh, grads.lstm_wh, st.m.lstm_wh, st.v.lstm_wh);
  upd(w.lstm_b, grads.lstm_b, st.m.lstm_b, st.v.lstm_b);
  upd(w.fc1_w, grads.fc1_w, st.m.fc1_w, st.v.fc1_w);
  upd(w.fc1_b, grads.fc1_b, st.m.fc1_b, st.v.fc1_b);
  upd(w.fc2_w, grads.fc2_w, st.m.fc2_w, st.v.fc2_w);
  upd(w.fc2_b, grads.fc2_b, st.m.fc2_b, st.v.fc2_b);
  upd(w.head_w, grads.head_w, st.m.head_w, st.v.head_w);
  upd(w.head_b, grads.head_b, st.m.head_b, st.v.head_b);
}

}  // namespace reachml
