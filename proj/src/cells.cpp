/* Copyright 2026 The MetaLSTM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "metalstm/cells.hpp"

#include <stdexcept>

namespace metalstm {

CellState zero_state(int size) {
  return CellState{Vector::Zero(size), Vector::Zero(size)};
}

LSTMVarParams wrap(Tape& t, const LSTMParams& p) {
  return LSTMVarParams{t.constant(p.W), t.constant(p.b)};
}

BasicVarParams wrap(Tape& t, const BasicLSTMParams& p) {
  BasicVarParams v;
  v.P_g = t.constant(p.P_g);
  v.P_o = t.constant(p.P_o);
  v.P_i = t.constant(p.P_i);
  v.P_f = t.constant(p.P_f);
  v.Q_g = t.constant(p.Q_g);
  v.Q_o = t.constant(p.Q_o);
  v.Q_i = t.constant(p.Q_i);
  v.Q_f = t.constant(p.Q_f);
  v.B_g = t.constant(p.B_g);
  v.B_o = t.constant(p.B_o);
  v.B_i = t.constant(p.B_i);
  v.B_f = t.constant(p.B_f);
  return v;
}

MetaVarParams wrap(Tape& t, const MetaLSTMParams& p) {
  return MetaVarParams{t.constant(p.W_m), t.constant(p.b_m),
                       t.constant(p.W_z)};
}

VarState zero_var_state(Tape& t, int size) {
  return VarState{t.constant(Matrix::Zero(size, 1)),
                  t.constant(Matrix::Zero(size, 1))};
}

namespace {

// Gate blocks stacked as (g, o, i, f); c = g.i + c_prev.f, h = o.tanh(c).
VarState gate_update(Tape& t, Var pre, const VarState& prev,
                     Eigen::Index hidden) {
  Var g = t.tanh(t.rows(pre, 0, hidden));
  Var o = t.sigmoid(t.rows(pre, hidden, hidden));
  Var i = t.sigmoid(t.rows(pre, 2 * hidden, hidden));
  Var f = t.sigmoid(t.rows(pre, 3 * hidden, hidden));
  Var c = t.add(t.cmul(g, i), t.cmul(prev.c, f));
  Var h = t.cmul(o, t.tanh(c));
  return VarState{h, c};
}

}  // namespace

VarState lstm_step(Tape& t, Var W, Var b, Var x, const VarState& prev) {
  const Eigen::Index hidden = t.value(prev.h).rows();
  if (t.value(W).rows() != 4 * hidden ||
      t.value(W).cols() != t.value(x).rows() + hidden) {
    throw DimensionError("lstm_step: weight shape does not match input/state");
  }
  Var xh = t.vconcat({x, prev.h});
  Var pre = t.add(t.matmul(W, xh), b);
  return gate_update(t, pre, prev, hidden);
}

std::pair<Var, Var> dynamic_weights(Tape& t, const BasicVarParams& p, Var z) {
  auto block = [&](Var P, Var Q) { return t.matmul(t.col_scale(P, z), Q); };
  Var W = t.vconcat({block(p.P_g, p.Q_g), block(p.P_o, p.Q_o),
                     block(p.P_i, p.Q_i), block(p.P_f, p.Q_f)});
  Var b = t.vconcat({t.matmul(p.B_g, z), t.matmul(p.B_o, z),
                     t.matmul(p.B_i, z), t.matmul(p.B_f, z)});
  return {W, b};
}

VarState basic_lstm_step(Tape& t, const BasicVarParams& p, Var z, Var x,
                         const VarState& prev) {
  auto [W, b] = dynamic_weights(t, p, z);
  return lstm_step(t, W, b, x, prev);
}

MetaStepVars meta_lstm_step(Tape& t, const MetaVarParams& p, Var x,
                            Var h_basic_prev, const VarState& meta_prev) {
  // The affine input is [x_t; h^_{t-1}; h_{t-1}], in exactly that order.
  const Eigen::Index m = t.value(meta_prev.h).rows();
  Var in = t.vconcat({x, meta_prev.h, h_basic_prev});
  if (t.value(p.W_m).cols() != t.value(in).rows() ||
      t.value(p.W_m).rows() != 4 * m) {
    throw DimensionError("meta_lstm_step: W_m shape mismatch");
  }
  Var pre = t.add(t.matmul(p.W_m, in), p.b_m);
  VarState next = gate_update(t, pre, meta_prev, m);
  Var z = t.matmul(p.W_z, next.h);
  return MetaStepVars{next, z};
}

void meta_stack_step(Tape& t, const MetaVarParams& mp,
                     const BasicVarParams& bp, Var x, VarState& meta_state,
                     VarState& basic_state) {
  MetaStepVars meta = meta_lstm_step(t, mp, x, basic_state.h, meta_state);
  meta_state = meta.state;
  basic_state = basic_lstm_step(t, bp, meta.z, x, basic_state);
}

// ---------------------------------------------------------------------------

namespace {

CellState extract(Tape& t, const VarState& s) {
  return CellState{t.value(s.h).col(0), t.value(s.c).col(0)};
}

}  // namespace

CellState lstm_step(const LSTMParams& p, const Vector& x,
                    const CellState& prev) {
  Tape t;
  VarState out = lstm_step(t, t.constant(p.W), t.constant(p.b), t.constant(x),
                           VarState{t.constant(prev.h), t.constant(prev.c)});
  return extract(t, out);
}

std::pair<Matrix, Vector> make_dynamic_weights(const BasicLSTMParams& p,
                                               const Vector& z) {
  Tape t;
  auto [W, b] = dynamic_weights(t, wrap(t, p), t.constant(z));
  return {t.value(W), Vector(t.value(b).col(0))};
}

CellState basic_lstm_step(const BasicLSTMParams& p, const Vector& z,
                          const Vector& x, const CellState& prev) {
  Tape t;
  VarState out =
      basic_lstm_step(t, wrap(t, p), t.constant(z), t.constant(x),
                      VarState{t.constant(prev.h), t.constant(prev.c)});
  return extract(t, out);
}

std::pair<CellState, Vector> meta_lstm_step(const MetaLSTMParams& p,
                                            const Vector& x,
                                            const Vector& h_basic_prev,
                                            const CellState& meta_prev) {
  Tape t;
  MetaStepVars out = meta_lstm_step(
      t, wrap(t, p), t.constant(x), t.constant(h_basic_prev),
      VarState{t.constant(meta_prev.h), t.constant(meta_prev.c)});
  return {extract(t, out.state), Vector(t.value(out.z).col(0))};
}

void meta_stack_step(const MetaLSTMParams& mp, const BasicLSTMParams& bp,
                     const Vector& x, CellState& meta_state,
                     CellState& basic_state) {
  Tape t;
  VarState ms{t.constant(meta_state.h), t.constant(meta_state.c)};
  VarState bs{t.constant(basic_state.h), t.constant(basic_state.c)};
  meta_stack_step(t, wrap(t, mp), wrap(t, bp), t.constant(x), ms, bs);
  meta_state = extract(t, ms);
  basic_state = extract(t, bs);
}

SequenceResult run_sequence(const LSTMParams& p,
                            const std::vector<Vector>& xs) {
  if (xs.empty()) {
    throw std::invalid_argument("run_sequence: empty input sequence");
  }
  const int h = static_cast<int>(p.b.size() / 4);
  SequenceResult out;
  out.final_state = zero_state(h);
  out.hs.reserve(xs.size());
  for (const Vector& x : xs) {
    out.final_state = lstm_step(p, x, out.final_state);
    out.hs.push_back(out.final_state.h);
  }
  return out;
}

MetaSequenceResult run_sequence(const MetaLSTMParams& mp,
                                const BasicLSTMParams& bp,
                                const std::vector<Vector>& xs) {
  if (xs.empty()) {
    throw std::invalid_argument("run_sequence: empty input sequence");
  }
  const int m = static_cast<int>(mp.b_m.size() / 4);
  const int h = static_cast<int>(bp.P_g.rows());
  MetaSequenceResult out;
  out.meta_state = zero_state(m);
  out.basic_state = zero_state(h);
  out.hs.reserve(xs.size());
  out.zs.reserve(xs.size());
  for (const Vector& x : xs) {
    auto [meta_next, z] =
        meta_lstm_step(mp, x, out.basic_state.h, out.meta_state);
    out.meta_state = meta_next;
    out.basic_state = basic_lstm_step(bp, z, x, out.basic_state);
    out.hs.push_back(out.basic_state.h);
    out.zs.push_back(z);
  }
  return out;
}

namespace {

template <typename RunFwd, typename RunBwd>
std::vector<Vector> bidi_concat(const std::vector<Vector>& xs, RunFwd fwd,
                                RunBwd bwd) {
  std::vector<Vector> reversed(xs.rbegin(), xs.rend());
  const std::vector<Vector> f = fwd(xs);
  const std::vector<Vector> b = bwd(reversed);
  std::vector<Vector> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Vector& hb = b[xs.size() - 1 - i];
    Vector cat(f[i].size() + hb.size());
    cat << f[i], hb;
    out.push_back(std::move(cat));
  }
  return out;
}

}  // namespace

std::vector<Vector> bidirectional_encode(const LSTMParams& fwd,
                                         const LSTMParams& bwd,
                                         const std::vector<Vector>& xs) {
  return bidi_concat(
      xs, [&](const std::vector<Vector>& s) { return run_sequence(fwd, s).hs; },
      [&](const std::vector<Vector>& s) { return run_sequence(bwd, s).hs; });
}

std::vector<Vector> bidirectional_encode(const MetaLSTMParams& fwd_m,
                                         const BasicLSTMParams& fwd_b,
                                         const MetaLSTMParams& bwd_m,
                                         const BasicLSTMParams& bwd_b,
                                         const std::vector<Vector>& xs) {
  return bidi_concat(
      xs,
      [&](const std::vector<Vector>& s) {
        return run_sequence(fwd_m, fwd_b, s).hs;
      },
      [&](const std::vector<Vector>& s) {
        return run_sequence(bwd_m, bwd_b, s).hs;
      });
}

// ---------------------------------------------------------------------------

std::int64_t count_params(CellKind kind, const CellDims& dims,
                          bool with_bias_generators) {
  const std::int64_t d = dims.d;
  const std::int64_t h = dims.h;
  const std::int64_t m = dims.m;
  const std::int64_t z = dims.z;
  if (d <= 0 || h <= 0 ||
      ((kind == CellKind::kMeta || kind == CellKind::kMetaStack ||
        kind == CellKind::kBasic) &&
       z <= 0) ||
      ((kind == CellKind::kMeta || kind == CellKind::kMetaStack) && m <= 0)) {
    throw std::invalid_argument("count_params: dimensions must be positive");
  }
  switch (kind) {
    case CellKind::kStandard:
      return 4 * h * h + 4 * h * d + 4 * h;
    case CellKind::kBasic:
      return 8 * h * z + 4 * d * z + (with_bias_generators ? 4 * h * z : 0);
    case CellKind::kMeta:
      return 4 * m * (d + h + m + 1) + m * z;
    case CellKind::kMetaStack:
      return count_params(CellKind::kBasic, dims, with_bias_generators) +
             count_params(CellKind::kMeta, dims);
  }
  throw std::invalid_argument("count_params: unknown cell kind");
}

LSTMParams init_lstm(int input_dim, int h, std::mt19937_64& rng) {
  LSTMParams p;
  p.W = glorot_uniform(4 * h, h + input_dim, rng);
  p.b = Vector::Zero(4 * h);
  p.b.segment(3 * h, h).setConstant(1.0);  // forget-gate block
  return p;
}

BasicLSTMParams init_basic(const CellDims& dims, std::mt19937_64& rng) {
  const int h = dims.h;
  const int z = dims.z;
  const int in = dims.h + dims.d;
  BasicLSTMParams p;
  p.P_g = glorot_uniform(h, z, rng);
  p.P_o = glorot_uniform(h, z, rng);
  p.P_i = glorot_uniform(h, z, rng);
  p.P_f = glorot_uniform(h, z, rng);
  p.Q_g = glorot_uniform(z, in, rng);
  p.Q_o = glorot_uniform(z, in, rng);
  p.Q_i = glorot_uniform(z, in, rng);
  p.Q_f = glorot_uniform(z, in, rng);
  p.B_g = glorot_uniform(h, z, rng);
  p.B_o = glorot_uniform(h, z, rng);
  p.B_i = glorot_uniform(h, z, rng);
  p.B_f = Matrix::Zero(h, z);
  return p;
}

MetaLSTMParams init_meta(const CellDims& dims, std::mt19937_64& rng) {
  const int m = dims.m;
  MetaLSTMParams p;
  p.W_m = glorot_uniform(4 * m, dims.d + dims.h + m, rng);
  p.b_m = Vector::Zero(4 * m);
  p.b_m.segment(3 * m, m).setConstant(1.0);
  p.W_z = glorot_uniform(dims.z, m, rng);
  return p;
}

}  // namespace metalstm
