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
#include "metalstm/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>
#include <stdexcept>

namespace metalstm {

double grad_check(const std::function<Var(Tape&)>& graph,
                  const std::vector<ParamStore*>& stores,
                  const GradCheckConfig& cfg) {
  if (cfg.eps <= 0.0) {
    throw std::invalid_argument("grad_check: eps must be positive");
  }
  if (cfg.samples_per_tensor < 1) {
    throw std::invalid_argument("grad_check: need at least one sample");
  }

  for (ParamStore* s : stores) {
    s->zero_grads();
  }
  {
    Tape tape;
    ForwardResult fwd = forward_scalar(tape, graph);
    tape.backward(fwd.root);
  }

  double max_rel = 0.0;
  for (ParamStore* store : stores) {
    for (const auto& name : store->names()) {
      auto& entry = store->entry(name);
      if (entry.frozen) {
        continue;
      }
      const Eigen::Index n = entry.value.size();
      const Eigen::Index samples =
          std::min<Eigen::Index>(cfg.samples_per_tensor, n);
      std::vector<Eigen::Index> coords(static_cast<std::size_t>(n));
      std::iota(coords.begin(), coords.end(), 0);
      std::partial_sort(coords.begin(), coords.begin() + samples,
                        coords.end(), [&](Eigen::Index a, Eigen::Index b) {
                          const double ga = std::abs(entry.grad(a));
                          const double gb = std::abs(entry.grad(b));
                          return ga != gb ? ga > gb : a < b;
                        });
      for (Eigen::Index s = 0; s < samples; ++s) {
        const Eigen::Index k = coords[static_cast<std::size_t>(s)];
        const double analytic = entry.grad(k);
        double* cell = entry.value.data() + k;
        const double saved = *cell;

        *cell = saved + cfg.eps;
        Tape plus;
        const double f_plus = forward_scalar(plus, graph).value;
        *cell = saved - cfg.eps;
        Tape minus;
        const double f_minus = forward_scalar(minus, graph).value;
        *cell = saved;

        const double central = (f_plus - f_minus) / (2.0 * cfg.eps);
        const double rel = std::abs(analytic - central) /
                           std::max(1e-12, std::abs(analytic) +
                                               std::abs(central));
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  return max_rel;
}

double grad_check(const std::function<Var(Tape&)>& graph, ParamStore& store,
                  const GradCheckConfig& cfg) {
  std::vector<ParamStore*> stores{&store};
  return grad_check(graph, stores, cfg);
}

}  // namespace metalstm
