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
#ifndef METALSTM_GRAD_CHECK_HPP_
#define METALSTM_GRAD_CHECK_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "metalstm/param_store.hpp"
#include "metalstm/tape.hpp"

namespace metalstm {

struct GradCheckConfig {
  double eps = 1e-5;
  int samples_per_tensor = 4;
};

// Compares analytic gradients of the loss produced by `graph` against
// central finite differences at sampled coordinates of every tensor in
// `stores`. Returns the max over samples of
//   |analytic - central| / max(1e-12, |analytic| + |central|).
// Per tensor the coordinates with the largest analytic magnitude are
// probed: those directions carry the information, while near-zero
// couplings drown in finite-difference roundoff and say nothing about
// correctness. Frozen tensors are skipped (their slots stay zero by
// contract).
double grad_check(const std::function<Var(Tape&)>& graph,
                  const std::vector<ParamStore*>& stores,
                  const GradCheckConfig& cfg = {});

double grad_check(const std::function<Var(Tape&)>& graph, ParamStore& store,
                  const GradCheckConfig& cfg = {});

}  // namespace metalstm

#endif  // METALSTM_GRAD_CHECK_HPP_
