// Copyright 2026 The roadwet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "roadwet/core.hpp"
#include "roadwet/metrics.hpp"

namespace roadwet::rnn {

/// Architecture and training hyperparameters.
struct NetworkSpec {
  std::size_t input_dim = 54;
  std::vector<std::size_t> hidden_layout{54, 54, 54};
  bool bidirectional = false;
  std::size_t output_dim = 2;
  double learning_rate = 1e-5;
  std::uint64_t seed = 1;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::size_t subsequence_len = 100;  // frames; 0 = whole sequences
  bool peepholes = true;
  bool standardize_inputs = true;  // z-score inputs with training-set statistics

  void validate() const {
    if (input_dim < 1 || output_dim < 1 || hidden_layout.empty()) throw DataError("network sizes must be >= 1");
    for (auto h : hidden_layout)
      if (h < 1) throw DataError("hidden layer sizes must be >= 1");
    if (!(learning_rate > 0)) throw DataError("learning_rate must be > 0");
  }
  std::size_t directions() const { return bidirectional ? 2 : 1; }
};

/// Parses "A-B-C" into layer sizes.
inline std::vector<std::size_t> parse_layout(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, '-')) {
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
      throw DataError("bad layout '" + text + "' (expected sizes like 216-216-216)");
    sizes.push_back(std::stoul(part));
    if (sizes.back() == 0) throw DataError("layout sizes must be >= 1");
  }
  if (sizes.empty()) throw DataError("empty layout");
  return sizes;
}

inline std::string format_layout(const std::vector<std::size_t>& sizes) {
  std::string s;
  for (std::size_t i = 0; i < sizes.size(); ++i) s += (i ? "-" : "") + std::to_string(sizes[i]);
  return s;
}

/// One LSTM direction. Gate rows are stacked [input; forget; candidate; output].
struct LstmLayerParams {
  Eigen::MatrixXd W;  // 4H x in
  Eigen::MatrixXd R;  // 4H x H
  Eigen::VectorXd b;  // 4H
  Eigen::VectorXd p_i, p_f, p_o;  // peepholes, H each

  std::size_t hidden() const { return static_cast<std::size_t>(R.cols()); }
  std::size_t input() const { return static_cast<std::size_t>(W.cols()); }

  static LstmLayerParams zeros(std::size_t in, std::size_t hidden) {
    const auto h = static_cast<Eigen::Index>(hidden);
    LstmLayerParams p;
    p.W = Eigen::MatrixXd::Zero(4 * h, static_cast<Eigen::Index>(in));
    p.R = Eigen::MatrixXd::Zero(4 * h, h);
    p.b = Eigen::VectorXd::Zero(4 * h);
    p.p_i = p.p_f = p.p_o = Eigen::VectorXd::Zero(h);
    return p;
  }

  template <typename F>
  void for_each_tensor(F&& f) {
    f(W.data(), W.size());
    f(R.data(), R.size());
    f(b.data(), b.size());
    f(p_i.data(), p_i.size());
    f(p_f.data(), p_f.size());
    f(p_o.data(), p_o.size());
  }
};

/// Trainable parameters: LSTM layers (index layer * directions + dir, dir 1
/// running backward in time) followed by the logistic output layer.
struct Params {
  std::vector<LstmLayerParams> layers;
  Eigen::MatrixXd V;  // output_dim x top width
  Eigen::VectorXd c;  // output_dim

  template <typename F>
  void for_each_tensor(F&& f) {
    for (auto& l : layers) l.for_each_tensor(f);
    f(V.data(), V.size());
    f(c.data(), c.size());
  }

  std::size_t size() const {
    std::size_t n = 0;
    const_cast<Params*>(this)->for_each_tensor([&](double*, Eigen::Index len) { n += static_cast<std::size_t>(len); });
    return n;
  }

  /// this += alpha * other
  void axpy(double alpha, const Params& other) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& a = layers[i];
      const auto& o = other.layers[i];
      a.W += alpha * o.W;
      a.R += alpha * o.R;
      a.b += alpha * o.b;
      a.p_i += alpha * o.p_i;
      a.p_f += alpha * o.p_f;
      a.p_o += alpha * o.p_o;
    }
    V += alpha * other.V;
    c += alpha * other.c;
  }

  bool all_finite() const {
    bool ok = true;
    const_cast<Params*>(this)->for_each_tensor([&](double* d, Eigen::Index n) {
      ok = ok && Eigen::Map<const Eigen::ArrayXd>(d, n).isFinite().all();
    });
    return ok;
  }
};

struct RnnModel {
  NetworkSpec spec;
  Params params;
  Eigen::VectorXd input_mean;   // subtracted before the first layer
  Eigen::VectorXd input_scale;  // multiplied after centering

  std::size_t layer_input_dim(std::size_t layer) const {
    return layer == 0 ? spec.input_dim : spec.hidden_layout[layer - 1] * spec.directions();
  }
  std::size_t top_width() const { return spec.hidden_layout.back() * spec.directions(); }
  const LstmLayerParams& lstm(std::size_t layer, std::size_t dir) const {
    return params.layers[layer * spec.directions() + dir];
  }
};

/// Same-shaped, all-zero parameter set.
inline Params zero_params(const NetworkSpec& spec) {
  Params p;
  for (std::size_t l = 0; l < spec.hidden_layout.size(); ++l) {
    const std::size_t in = l == 0 ? spec.input_dim : spec.hidden_layout[l - 1] * spec.directions();
    for (std::size_t d = 0; d < spec.directions(); ++d) p.layers.push_back(LstmLayerParams::zeros(in, spec.hidden_layout[l]));
  }
  const auto top = static_cast<Eigen::Index>(spec.hidden_layout.back() * spec.directions());
  p.V = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec.output_dim), top);
  p.c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.output_dim));
  return p;
}

/// Weights uniform in [-0.1, 0.1] from a generator seeded by spec.seed;
/// biases zero. Peephole weights stay zero when peepholes are disabled.
inline RnnModel init_model(const NetworkSpec& spec) {
  spec.validate();
  RnnModel m;
  m.spec = spec;
  m.params = zero_params(spec);
  Rng rng(spec.seed);
  const auto fill = [&](auto& mat) {
    for (Eigen::Index i = 0; i < mat.size(); ++i) mat.data()[i] = rng.uniform(-0.1, 0.1);
  };
  for (auto& l : m.params.layers) {
    fill(l.W);
    fill(l.R);
    if (spec.peepholes) {
      fill(l.p_i);
      fill(l.p_f);
      fill(l.p_o);
    }
  }
  fill(m.params.V);
  m.input_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.input_dim));
  m.input_scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(spec.input_dim));
  return m;
}

inline std::size_t param_count(const RnnModel& m) { return m.params.size(); }

// ---------------------------------------------------------------------------
// Forward / backward

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Activations of one LSTM direction, stored in processing order.
struct LstmTrace {
  Eigen::MatrixXd x;      // in x T
  Eigen::MatrixXd gates;  // 4H x T, post-activation [i; f; z; o]
  Eigen::MatrixXd c;      // H x T
  Eigen::MatrixXd tc;     // tanh(c)
  Eigen::MatrixXd h;      // H x T
};

namespace detail {

inline Eigen::MatrixXd reverse_cols(const Eigen::MatrixXd& m) { return m.rowwise().reverse(); }

}  // namespace detail

/// Runs one direction over columns of `x` (in x T). With `reversed` the
/// sequence is processed back to front; the trace stays in processing order.
inline LstmTrace lstm_trace(const LstmLayerParams& p, const Eigen::MatrixXd& x, bool reversed) {
  if (static_cast<std::size_t>(x.rows()) != p.input()) throw DataError("LSTM input dimension mismatch");
  const auto H = static_cast<Eigen::Index>(p.hidden());
  const Eigen::Index T = x.cols();
  LstmTrace tr;
  tr.x = reversed ? detail::reverse_cols(x) : x;
  tr.gates.resize(4 * H, T);
  tr.c.resize(H, T);
  tr.tc.resize(H, T);
  tr.h.resize(H, T);
  if (T == 0) return tr;
  tr.gates.noalias() = p.W * tr.x;
  tr.gates.colwise() += p.b;

  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(H), c_prev = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd rec(4 * H);
  for (Eigen::Index t = 0; t < T; ++t) {
    rec.noalias() = p.R * h_prev;
    auto g = tr.gates.col(t);
    g += rec;
    auto gi = g.segment(0, H), gf = g.segment(H, H), gz = g.segment(2 * H, H), go = g.segment(3 * H, H);
    gi = (gi.array() + p.p_i.array() * c_prev.array()).unaryExpr([](double v) { return sigmoid(v); }).matrix();
    gf = (gf.array() + p.p_f.array() * c_prev.array()).unaryExpr([](double v) { return sigmoid(v); }).matrix();
    gz = gz.array().tanh().matrix();
    tr.c.col(t) = gf.cwiseProduct(c_prev) + gi.cwiseProduct(gz);
    go = (go.array() + p.p_o.array() * tr.c.col(t).array()).unaryExpr([](double v) { return sigmoid(v); }).matrix();
    tr.tc.col(t) = tr.c.col(t).array().tanh().matrix();
    tr.h.col(t) = go.cwiseProduct(tr.tc.col(t));
    h_prev = tr.h.col(t);
    c_prev = tr.c.col(t);
  }
  return tr;
}

/// Hidden outputs (H x T) in input order.
inline Eigen::MatrixXd lstm_forward(const LstmLayerParams& p, const Eigen::MatrixXd& x, bool reversed = false) {
  auto tr = lstm_trace(p, x, reversed);
  return reversed ? detail::reverse_cols(tr.h) : std::move(tr.h);
}

/// Concatenated [forward; backward] hidden outputs, 2H x T.
inline Eigen::MatrixXd blstm_forward(const LstmLayerParams& fwd, const LstmLayerParams& bwd, const Eigen::MatrixXd& x) {
  if (fwd.hidden() != bwd.hidden() || fwd.input() != bwd.input())
    throw DataError("BLSTM directions have different shapes");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(2 * fwd.hidden()), x.cols());
  const auto H = static_cast<Eigen::Index>(fwd.hidden());
  out.topRows(H) = lstm_forward(fwd, x, false);
  out.bottomRows(H) = lstm_forward(bwd, x, true);
  return out;
}

/// Gradient of the loss w.r.t. one direction's parameters, accumulated into
/// `grad`. `dh` is dLoss/dh in processing order; returns dLoss/dx in
/// processing order.
inline Eigen::MatrixXd lstm_backward(const LstmLayerParams& p, const LstmTrace& tr, const Eigen::MatrixXd& dh,
                                     LstmLayerParams& grad, bool peepholes) {
  const auto H = static_cast<Eigen::Index>(p.hidden());
  const Eigen::Index T = tr.h.cols();
  Eigen::MatrixXd dG(4 * H, T);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H), dc_next = Eigen::VectorXd::Zero(H);
  Eigen::ArrayXd dhv(H), dc(H), c_prev(H), di(H), df(H), dz(H), dout(H);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto g = tr.gates.col(t);
    const Eigen::ArrayXd i = g.segment(0, H).array(), f = g.segment(H, H).array(), z = g.segment(2 * H, H).array(),
                         o = g.segment(3 * H, H).array();
    const Eigen::ArrayXd tc = tr.tc.col(t).array();
    if (t > 0) c_prev = tr.c.col(t - 1).array();
    else c_prev.setZero();

    dhv = dh.col(t).array() + dh_next.array();
    dout = dhv * tc * o * (1.0 - o);
    dc = dhv * o * (1.0 - tc * tc) + dc_next.array() + p.p_o.array() * dout;
    di = dc * z * i * (1.0 - i);
    df = dc * c_prev * f * (1.0 - f);
    dz = dc * i * (1.0 - z * z);

    dG.col(t).segment(0, H) = di.matrix();
    dG.col(t).segment(H, H) = df.matrix();
    dG.col(t).segment(2 * H, H) = dz.matrix();
    dG.col(t).segment(3 * H, H) = dout.matrix();

    if (peepholes) {
      grad.p_i.array() += di * c_prev;
      grad.p_f.array() += df * c_prev;
      grad.p_o.array() += dout * tr.c.col(t).array();
    }
    dh_next.noalias() = p.R.transpose() * dG.col(t);
    dc_next = (dc * f + p.p_i.array() * di + p.p_f.array() * df).matrix();
  }
  if (T > 0) {
    grad.W.noalias() += dG * tr.x.transpose();
    if (T > 1) grad.R.noalias() += dG.rightCols(T - 1) * tr.h.leftCols(T - 1).transpose();
    grad.b += dG.rowwise().sum();
  }
  return p.W.transpose() * dG;
}

/// Inputs (dim x T) after the model's input standardization.
inline Eigen::MatrixXd normalize_inputs(const RnnModel& m, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.rows()) != m.spec.input_dim)
    throw DataError("input dimension " + std::to_string(x.rows()) + " does not match model input " +
                    std::to_string(m.spec.input_dim));
  return ((x.colwise() - m.input_mean).array().colwise() * m.input_scale.array()).matrix();
}

/// Full forward trace used by backpropagation.
struct ForwardTrace {
  std::vector<LstmTrace> layers;  // same indexing as Params::layers
  Eigen::MatrixXd top;            // top hidden outputs, width x T
  Eigen::MatrixXd y;              // posteriors, output_dim x T
};

/// Stacked LSTM/BLSTM layers over already-normalized inputs.
inline ForwardTrace forward_trace(const RnnModel& m, const Eigen::MatrixXd& x) {
  ForwardTrace ft;
  Eigen::MatrixXd cur = x;
  const std::size_t dirs = m.spec.directions();
  for (std::size_t l = 0; l < m.spec.hidden_layout.size(); ++l) {
    const auto H = static_cast<Eigen::Index>(m.spec.hidden_layout[l]);
    Eigen::MatrixXd next(H * static_cast<Eigen::Index>(dirs), cur.cols());
    for (std::size_t d = 0; d < dirs; ++d) {
      ft.layers.push_back(lstm_trace(m.lstm(l, d), cur, d == 1));
      const auto& h = ft.layers.back().h;
      next.middleRows(H * static_cast<Eigen::Index>(d), H) = d == 1 ? detail::reverse_cols(h) : h;
    }
    cur = std::move(next);
  }
  ft.top = std::move(cur);
  ft.y = (m.params.V * ft.top).colwise() + m.params.c;
  ft.y = ft.y.unaryExpr([](double v) { return sigmoid(v); });
  return ft;
}

/// Per-frame posteriors (output_dim x T), independent logistic units.
inline Eigen::MatrixXd model_forward(const RnnModel& m, const Eigen::MatrixXd& x) {
  return forward_trace(m, normalize_inputs(m, x)).y;
}

/// Sum over frames and outputs of squared error.
inline double sse_loss(const Eigen::MatrixXd& y, const Eigen::MatrixXd& targets) {
  if (y.rows() != targets.rows() || y.cols() != targets.cols()) throw DataError("sse_loss shape mismatch");
  return (y - targets).squaredNorm();
}

/// One-hot targets (output_dim x T) from class labels.
inline Eigen::MatrixXd one_hot(std::span<const int> labels, std::size_t classes = 2) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] < 0 || static_cast<std::size_t>(labels[t]) >= classes) throw DataError("label out of range");
    d(labels[t], static_cast<Eigen::Index>(t)) = 1.0;
  }
  return d;
}

struct Gradients {
  Params grad;
  double loss = 0.0;
};

/// Exact SSE gradients by backpropagation through time. `x` is raw input
/// (dim x T); the model's input standardization is applied first.
inline Gradients bptt_gradients(const RnnModel& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets) {
  Gradients out;
  out.grad = zero_params(m.spec);
  if (targets.rows() != static_cast<Eigen::Index>(m.spec.output_dim) || targets.cols() != x.cols())
    throw DataError("targets shape does not match outputs");
  if (x.cols() == 0) {
    (void)normalize_inputs(m, x);
    return out;
  }
  const ForwardTrace ft = forward_trace(m, normalize_inputs(m, x));
  out.loss = sse_loss(ft.y, targets);

  const Eigen::MatrixXd dpre = (2.0 * (ft.y - targets)).cwiseProduct(ft.y.cwiseProduct((1.0 - ft.y.array()).matrix()));
  out.grad.V.noalias() = dpre * ft.top.transpose();
  out.grad.c = dpre.rowwise().sum();
  Eigen::MatrixXd dcur = m.params.V.transpose() * dpre;

  const std::size_t dirs = m.spec.directions();
  for (std::size_t l = m.spec.hidden_layout.size(); l-- > 0;) {
    const auto H = static_cast<Eigen::Index>(m.spec.hidden_layout[l]);
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.layer_input_dim(l)), x.cols());
    for (std::size_t d = 0; d < dirs; ++d) {
      const std::size_t idx = l * dirs + d;
      const Eigen::MatrixXd dh_in = dcur.middleRows(H * static_cast<Eigen::Index>(d), H);
      if (d == 1) {
        dx += detail::reverse_cols(lstm_backward(m.params.layers[idx], ft.layers[idx], detail::reverse_cols(dh_in),
                                                 out.grad.layers[idx], m.spec.peepholes));
      } else {
        dx += lstm_backward(m.params.layers[idx], ft.layers[idx], dh_in, out.grad.layers[idx], m.spec.peepholes);
      }
    }
    dcur = std::move(dx);
  }
  if (!std::isfinite(out.loss) || !out.grad.all_finite()) throw NumericError("non-finite value during backpropagation");
  return out;
}

// ---------------------------------------------------------------------------
// Training

/// One labeled sequence: inputs are dim x T, one label per column.
struct Sequence {
  Eigen::MatrixXd inputs;
  std::vector<int> labels;
};

struct EpochStats {
  double train_sse = 0.0;
  double val_sse = 0.0;
  double val_uar = 0.0;
  double wall_seconds = 0.0;  // never serialized
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 0-based
};

struct TrainResult {
  RnnModel model;
  TrainHistory history;
};

/// Splits sequences into windows of `len` frames; a shorter tail is kept.
inline std::vector<Sequence> split_subsequences(const std::vector<Sequence>& seqs, std::size_t len) {
  std::vector<Sequence> out;
  for (const auto& s : seqs) {
    const auto T = static_cast<std::size_t>(s.inputs.cols());
    const std::size_t step = len == 0 ? std::max<std::size_t>(T, 1) : len;
    for (std::size_t start = 0; start < T; start += step) {
      const std::size_t n = std::min(step, T - start);
      Sequence piece;
      piece.inputs = s.inputs.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n));
      piece.labels.assign(s.labels.begin() + static_cast<std::ptrdiff_t>(start),
                          s.labels.begin() + static_cast<std::ptrdiff_t>(start + n));
      out.push_back(std::move(piece));
    }
  }
  return out;
}

struct FramePredictions {
  std::vector<int> classes;
  Eigen::MatrixXd posteriors;  // output_dim x T
};

/// Argmax decision per frame; ties go to class 0 (Dry). Long inputs are
/// processed in windows of spec.subsequence_len frames, matching training.
inline FramePredictions predict_frames(const RnnModel& m, const Eigen::MatrixXd& x) {
  FramePredictions out;
  const Eigen::MatrixXd xn = normalize_inputs(m, x);
  const Eigen::Index T = x.cols();
  out.posteriors.resize(static_cast<Eigen::Index>(m.spec.output_dim), T);
  const Eigen::Index step = m.spec.subsequence_len == 0 ? std::max<Eigen::Index>(T, 1)
                                                         : static_cast<Eigen::Index>(m.spec.subsequence_len);
  for (Eigen::Index start = 0; start < T; start += step) {
    const Eigen::Index n = std::min(step, T - start);
    out.posteriors.middleCols(start, n) = forward_trace(m, xn.middleCols(start, n)).y;
  }
  out.classes.resize(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < out.posteriors.rows(); ++k)
      if (out.posteriors(k, t) > out.posteriors(best, t)) best = k;
    out.classes[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return out;
}

/// Fits z-score statistics over all training frames; zero-variance inputs
/// keep scale 1.
inline void fit_standardization(RnnModel& m, const std::vector<Sequence>& seqs) {
  const auto D = static_cast<Eigen::Index>(m.spec.input_dim);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(D), sq = Eigen::VectorXd::Zero(D);
  double n = 0;
  for (const auto& s : seqs) {
    sum += s.inputs.rowwise().sum();
    n += static_cast<double>(s.inputs.cols());
  }
  if (n == 0) return;
  const Eigen::VectorXd mean = sum / n;
  for (const auto& s : seqs) sq += (s.inputs.colwise() - mean).rowwise().squaredNorm();
  m.input_mean = mean;
  m.input_scale.resize(D);
  for (Eigen::Index j = 0; j < D; ++j) {
    const double sd = std::sqrt(sq[j] / n);
    m.input_scale[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
}

struct Evaluation {
  double sse = 0.0;
  double uar = 0.0;
};

inline Evaluation evaluate(const RnnModel& m, const std::vector<Sequence>& seqs) {
  Evaluation e;
  ConfusionMatrix cm;
  for (const auto& s : seqs) {
    const auto p = predict_frames(m, s.inputs);
    e.sse += sse_loss(p.posteriors, one_hot(s.labels, m.spec.output_dim));
    for (std::size_t t = 0; t < s.labels.size(); ++t) cm.add(s.labels[t], p.classes[t]);
  }
  e.uar = uar(cm);
  return e;
}

/// Online gradient descent over shuffled subsequences, one parameter update
/// per subsequence. Keeps the epoch with the best validation UAR (lower
/// validation SSE breaks ties) and stops after `patience` epochs without
/// improvement. An empty validation set validates on the training data.
inline TrainResult train(RnnModel model, const std::vector<Sequence>& train_set, const std::vector<Sequence>& val_set) {
  const NetworkSpec& spec = model.spec;
  if (train_set.empty()) throw DataError("empty training set");
  for (const auto& s : train_set)
    if (static_cast<std::size_t>(s.inputs.cols()) != s.labels.size()) throw DataError("sequence label count mismatch");
  if (spec.standardize_inputs) fit_standardization(model, train_set);
  const std::vector<Sequence>& validation = val_set.empty() ? train_set : val_set;

  const auto chunks = split_subsequences(train_set, spec.subsequence_len);
  std::vector<Eigen::MatrixXd> targets;
  targets.reserve(chunks.size());
  for (const auto& c : chunks) targets.push_back(one_hot(c.labels, spec.output_dim));

  TrainResult result{model, {}};
  std::optional<Evaluation> best;
  std::size_t wait = 0;
  std::vector<std::size_t> order(chunks.size());
  for (std::size_t epoch = 0; epoch < spec.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(Rng::derive(spec.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    EpochStats stats;
    for (std::size_t idx : order) {
      const Gradients g = bptt_gradients(model, chunks[idx].inputs, targets[idx]);
      stats.train_sse += g.loss;
      model.params.axpy(-spec.learning_rate, g.grad);
    }
    const Evaluation ev = evaluate(model, validation);
    stats.val_sse = ev.sse;
    stats.val_uar = ev.uar;
    stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(stats);

    const bool improved = !best || ev.uar > best->uar || (ev.uar == best->uar && ev.sse < best->sse);
    if (improved) {
      best = ev;
      result.model = model;
      result.history.best_epoch = epoch;
      wait = 0;
    } else if (++wait > spec.patience) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json tensor_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Eigen::MatrixXd tensor_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                                        const std::string& what) {
  if (j.at("rows").get<Eigen::Index>() != rows || j.at("cols").get<Eigen::Index>() != cols)
    throw DataError("model tensor '" + what + "' has wrong shape");
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw DataError("model tensor '" + what + "' truncated");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

}  // namespace detail

inline nlohmann::json spec_to_json(const NetworkSpec& s) {
  return {{"input_dim", s.input_dim},
          {"hidden_layout", format_layout(s.hidden_layout)},
          {"bidirectional", s.bidirectional},
          {"output_dim", s.output_dim},
          {"learning_rate", s.learning_rate},
          {"seed", s.seed},
          {"max_epochs", s.max_epochs},
          {"patience", s.patience},
          {"subsequence_len", s.subsequence_len},
          {"peepholes", s.peepholes},
          {"standardize_inputs", s.standardize_inputs}};
}

inline NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec s;
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.hidden_layout = parse_layout(j.at("hidden_layout").get<std::string>());
  s.bidirectional = j.at("bidirectional").get<bool>();
  s.output_dim = j.at("output_dim").get<std::size_t>();
  s.learning_rate = j.at("learning_rate").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.max_epochs = j.at("max_epochs").get<std::size_t>();
  s.patience = j.at("patience").get<std::size_t>();
  s.subsequence_len = j.at("subsequence_len").get<std::size_t>();
  s.peepholes = j.at("peepholes").get<bool>();
  s.standardize_inputs = j.at("standardize_inputs").get<bool>();
  s.validate();
  return s;
}

/// JSON container: format tag and version, spec, input standardization, then
/// every tensor row-major with its shape. Training history is optional and
/// excludes wall-clock times.
inline nlohmann::json model_to_json(const RnnModel& m, const TrainHistory* history = nullptr) {
  nlohmann::json j;
  j["format"] = "roadwet-rnn";
  j["format_version"] = kModelFormatVersion;
  j["spec"] = spec_to_json(m.spec);
  j["input_mean"] = std::vector<double>(m.input_mean.data(), m.input_mean.data() + m.input_mean.size());
  j["input_scale"] = std::vector<double>(m.input_scale.data(), m.input_scale.data() + m.input_scale.size());
  auto layers = nlohmann::json::array();
  const std::size_t dirs = m.spec.directions();
  for (std::size_t i = 0; i < m.params.layers.size(); ++i) {
    const auto& l = m.params.layers[i];
    layers.push_back({{"layer", i / dirs},
                      {"direction", i % dirs == 0 ? "forward" : "backward"},
                      {"W", detail::tensor_json(l.W)},
                      {"R", detail::tensor_json(l.R)},
                      {"b", detail::tensor_json(l.b)},
                      {"p_i", detail::tensor_json(l.p_i)},
                      {"p_f", detail::tensor_json(l.p_f)},
                      {"p_o", detail::tensor_json(l.p_o)}});
  }
  j["lstm_layers"] = std::move(layers);
  j["output_layer"] = {{"V", detail::tensor_json(m.params.V)}, {"c", detail::tensor_json(m.params.c)}};
  if (history) {
    auto epochs = nlohmann::json::array();
    for (const auto& e : history->epochs)
      epochs.push_back({{"train_sse", e.train_sse}, {"val_sse", e.val_sse}, {"val_uar", e.val_uar}});
    j["history"] = {{"epochs", std::move(epochs)}, {"best_epoch", history->best_epoch}};
  }
  return j;
}

inline RnnModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "roadwet-rnn") throw DataError("not an RNN model file");
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw DataError("unsupported RNN model format_version " + j.at("format_version").dump());
    RnnModel m;
    m.spec = spec_from_json(j.at("spec"));
    m.params = zero_params(m.spec);
    const auto D = static_cast<Eigen::Index>(m.spec.input_dim);
    m.input_mean = detail::tensor_from_json({{"rows", D}, {"cols", 1}, {"data", j.at("input_mean")}}, D, 1, "input_mean");
    m.input_scale =
        detail::tensor_from_json({{"rows", D}, {"cols", 1}, {"data", j.at("input_scale")}}, D, 1, "input_scale");
    const auto& layers = j.at("lstm_layers");
    if (layers.size() != m.params.layers.size()) throw DataError("model has wrong number of LSTM layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& l = m.params.layers[i];
      const auto& lj = layers[i];
      l.W = detail::tensor_from_json(lj.at("W"), l.W.rows(), l.W.cols(), "W");
      l.R = detail::tensor_from_json(lj.at("R"), l.R.rows(), l.R.cols(), "R");
      l.b = detail::tensor_from_json(lj.at("b"), l.b.rows(), 1, "b");
      l.p_i = detail::tensor_from_json(lj.at("p_i"), l.p_i.rows(), 1, "p_i");
      l.p_f = detail::tensor_from_json(lj.at("p_f"), l.p_f.rows(), 1, "p_f");
      l.p_o = detail::tensor_from_json(lj.at("p_o"), l.p_o.rows(), 1, "p_o");
    }
    const auto& out = j.at("output_layer");
    m.params.V = detail::tensor_from_json(out.at("V"), m.params.V.rows(), m.params.V.cols(), "V");
    m.params.c = detail::tensor_from_json(out.at("c"), m.params.c.rows(), 1, "c");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed RNN model: ") + e.what());
  }
}

}  // namespace roadwet::rnn
