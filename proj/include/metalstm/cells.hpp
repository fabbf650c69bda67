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
#ifndef METALSTM_CELLS_HPP_
#define METALSTM_CELLS_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "metalstm/tape.hpp"
#include "metalstm/types.hpp"

namespace metalstm {

// Recurrent cells. The standard LSTM stacks its four gate blocks in the
// order (g, o, i, f): candidate, output, input, forget. The basic LSTM uses
// the same update but its weights are generated per step from a meta vector
// z_t through low-rank factors P * diag(z_t) * Q and bias generators B * z_t.
// The meta LSTM is a small standard cell over [x_t; h^_{t-1}; h_{t-1}] whose
// hidden state is projected to z_t.

struct CellDims {
  int d = 0;  // input (embedding) size
  int h = 0;  // basic / standard hidden size
  int m = 0;  // meta hidden size
  int z = 0;  // meta vector size
};

struct LSTMParams {
  Matrix W;  // 4h x (h + input_dim)
  Vector b;  // 4h
};

struct BasicLSTMParams {
  Matrix P_g, P_o, P_i, P_f;  // h x z
  Matrix Q_g, Q_o, Q_i, Q_f;  // z x (h + d)
  Matrix B_g, B_o, B_i, B_f;  // h x z
};

struct MetaLSTMParams {
  Matrix W_m;  // 4m x (d + h + m)
  Vector b_m;  // 4m
  Matrix W_z;  // z x m
};

struct CellState {
  Vector h;
  Vector c;
};

CellState zero_state(int size);

// ---------------------------------------------------------------------------
// Tape-level cores. All training paths go through these; the value-level
// operations below are thin wrappers over a scratch tape, so there is a
// single implementation of every update rule.

struct VarState {
  Var h;
  Var c;
};

struct LSTMVarParams {
  Var W;
  Var b;
};

struct BasicVarParams {
  Var P_g, P_o, P_i, P_f;
  Var Q_g, Q_o, Q_i, Q_f;
  Var B_g, B_o, B_i, B_f;
};

struct MetaVarParams {
  Var W_m;
  Var b_m;
  Var W_z;
};

LSTMVarParams wrap(Tape& t, const LSTMParams& p);
BasicVarParams wrap(Tape& t, const BasicLSTMParams& p);
MetaVarParams wrap(Tape& t, const MetaLSTMParams& p);

VarState zero_var_state(Tape& t, int size);

// One LSTM update given an explicit weight matrix and bias: gates from
// W [x; h_prev] + b, then c = g.i + c_prev.f and h = o.tanh(c).
VarState lstm_step(Tape& t, Var W, Var b, Var x, const VarState& prev);

// W(z_t) and b(z_t): per gate block P * diag(z_t) * Q and B * z_t.
std::pair<Var, Var> dynamic_weights(Tape& t, const BasicVarParams& p, Var z);

// Basic LSTM step: materializes (W(z_t), b(z_t)) and applies lstm_step, so
// a constant z_t reproduces the static cell bit for bit.
VarState basic_lstm_step(Tape& t, const BasicVarParams& p, Var z, Var x,
                         const VarState& prev);

struct MetaStepVars {
  VarState state;  // meta cell state, dimension m
  Var z;           // meta vector, dimension z
};

// Meta cell update over [x_t; h^_{t-1}; h_{t-1}], then z_t = W_z h^_t.
MetaStepVars meta_lstm_step(Tape& t, const MetaVarParams& p, Var x,
                            Var h_basic_prev, const VarState& meta_prev);

// Composite step: meta first (reading the previous basic hidden state),
// then the basic cell driven by the fresh z_t.
void meta_stack_step(Tape& t, const MetaVarParams& mp,
                     const BasicVarParams& bp, Var x, VarState& meta_state,
                     VarState& basic_state);

// ---------------------------------------------------------------------------
// Value-level operations.

CellState lstm_step(const LSTMParams& p, const Vector& x,
                    const CellState& prev);

std::pair<Matrix, Vector> make_dynamic_weights(const BasicLSTMParams& p,
                                               const Vector& z);

CellState basic_lstm_step(const BasicLSTMParams& p, const Vector& z,
                          const Vector& x, const CellState& prev);

std::pair<CellState, Vector> meta_lstm_step(const MetaLSTMParams& p,
                                            const Vector& x,
                                            const Vector& h_basic_prev,
                                            const CellState& meta_prev);

void meta_stack_step(const MetaLSTMParams& mp, const BasicLSTMParams& bp,
                     const Vector& x, CellState& meta_state,
                     CellState& basic_state);

struct SequenceResult {
  std::vector<Vector> hs;
  CellState final_state;
};

struct MetaSequenceResult {
  std::vector<Vector> hs;
  std::vector<Vector> zs;
  CellState basic_state;
  CellState meta_state;
};

// Runs a cell over a sequence from zero initial states; one hidden vector
// per input position. Throws on an empty sequence.
SequenceResult run_sequence(const LSTMParams& p, const std::vector<Vector>& xs);
MetaSequenceResult run_sequence(const MetaLSTMParams& mp,
                                const BasicLSTMParams& bp,
                                const std::vector<Vector>& xs);

// Per-position concatenation [fwd h_t; bwd h_t], the backward pass computed
// over the reversed input and re-reversed.
std::vector<Vector> bidirectional_encode(const LSTMParams& fwd,
                                         const LSTMParams& bwd,
                                         const std::vector<Vector>& xs);
std::vector<Vector> bidirectional_encode(const MetaLSTMParams& fwd_m,
                                         const BasicLSTMParams& fwd_b,
                                         const MetaLSTMParams& bwd_m,
                                         const BasicLSTMParams& bwd_b,
                                         const std::vector<Vector>& xs);

// ---------------------------------------------------------------------------
// Parameter accounting.

enum class CellKind {
  kStandard,   // 4h^2 + 4hd + 4h
  kBasic,      // 8hz + 4dz, plus 4hz when bias generators are counted
  kMeta,       // 4m(d + h + m + 1) + mz
  kMetaStack,  // kBasic + kMeta
};

std::int64_t count_params(CellKind kind, const CellDims& dims,
                          bool with_bias_generators = false);

// ---------------------------------------------------------------------------
// Initialization. Glorot uniform per tensor; forget-gate bias entries start
// at 1.0 for standard-form cells and B_f starts at zero for the basic cell.

LSTMParams init_lstm(int input_dim, int h, std::mt19937_64& rng);
BasicLSTMParams init_basic(const CellDims& dims, std::mt19937_64& rng);
MetaLSTMParams init_meta(const CellDims& dims, std::mt19937_64& rng);

}  // namespace metalstm

#endif  // METALSTM_CELLS_HPP_
