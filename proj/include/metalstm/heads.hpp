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
#ifndef METALSTM_HEADS_HPP_
#define METALSTM_HEADS_HPP_

#include <span>
#include <utility>
#include <vector>

#include "metalstm/tape.hpp"
#include "metalstm/types.hpp"

namespace metalstm {

struct ClassifierParams {
  Matrix W;  // n_classes x rep_dim
  Vector b;  // n_classes
};

// Linear-chain CRF with explicit start/stop scores. A path
// y_1..y_T scores start[y_1] + sum_t emit_t[y_t]
// + sum_{t>=2} trans(y_{t-1}, y_t) + stop[y_T].
struct CRFParams {
  Matrix emit;   // n_tags x rep_dim, projects representations to emissions
  Matrix trans;  // n_tags x n_tags, trans(prev, next)
  Vector start;  // n_tags
  Vector stop;   // n_tags
};

// softmax(W h + b); entries in (0,1), summing to 1.
Vector classify(const Vector& rep, const ClassifierParams& p);

// Log-space forward algorithm over already-projected emission scores.
double crf_log_partition(const std::vector<Vector>& emissions,
                         const CRFParams& p);

// Negative log-likelihood of the gold path: log Z - score(gold).
double crf_nll(const std::vector<Vector>& emissions, const CRFParams& p,
               const std::vector<int>& tags);

// Max-scoring path; ties break toward the lower tag index.
std::pair<std::vector<int>, double> crf_viterbi(
    const std::vector<Vector>& emissions, const CRFParams& p);

// Tape-level versions used by training graphs. Emissions are n_tags-by-1
// vars; trans/start/stop come from a ParamStore binding or constants.
Var crf_log_partition(Tape& t, std::span<const Var> emissions, Var trans,
                      Var start, Var stop);
Var crf_nll(Tape& t, std::span<const Var> emissions, Var trans, Var start,
            Var stop, const std::vector<int>& tags);

// Cross entropy against a one-hot gold label: logsumexp(logits) -
// logits[gold].
Var cross_entropy(Tape& t, Var logits, int gold);

}  // namespace metalstm

#endif  // METALSTM_HEADS_HPP_
