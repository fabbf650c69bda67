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
#include "metalstm/heads.hpp"

#include <stdexcept>
#include <string>

namespace metalstm {

namespace {

void check_tags(const std::vector<int>& tags, Eigen::Index n_tags,
                std::size_t n_positions) {
  if (tags.size() != n_positions) {
    throw DimensionError("crf: tag path length does not match emissions");
  }
  for (int y : tags) {
    if (y < 0 || y >= n_tags) {
      throw std::out_of_range("crf: tag index " + std::to_string(y) +
                              " outside tagset of size " +
                              std::to_string(n_tags));
    }
  }
}

}  // namespace

Vector classify(const Vector& rep, const ClassifierParams& p) {
  if (p.W.cols() != rep.size() || p.b.size() != p.W.rows()) {
    throw DimensionError("classify: parameter shapes do not match input");
  }
  return softmax(Vector(p.W * rep + p.b));
}

Var cross_entropy(Tape& t, Var logits, int gold) {
  if (gold < 0 || gold >= t.value(logits).rows()) {
    throw std::out_of_range("cross_entropy: label " + std::to_string(gold) +
                            " outside class range");
  }
  return t.sub(t.logsumexp(logits), t.pick(logits, gold, 0));
}

Var crf_log_partition(Tape& t, std::span<const Var> emissions, Var trans,
                      Var start, Var stop) {
  if (emissions.empty()) {
    throw std::invalid_argument("crf_log_partition: empty emission sequence");
  }
  const Eigen::Index n_tags = t.value(start).rows();
  Var alpha = t.add(start, emissions[0]);
  for (std::size_t step = 1; step < emissions.size(); ++step) {
    // scores(i, j) = alpha(i) + trans(i, j); alpha'(j) = lse_i + emit(j).
    Var scores = t.add(t.broadcast_cols(alpha, n_tags), trans);
    alpha = t.add(t.transpose(t.colwise_logsumexp(scores)), emissions[step]);
  }
  return t.logsumexp(t.add(alpha, stop));
}

Var crf_nll(Tape& t, std::span<const Var> emissions, Var trans, Var start,
            Var stop, const std::vector<int>& tags) {
  check_tags(tags, t.value(start).rows(), emissions.size());
  Var log_z = crf_log_partition(t, emissions, trans, start, stop);
  Var gold = t.pick(start, tags[0], 0);
  for (std::size_t step = 0; step < emissions.size(); ++step) {
    gold = t.add(gold, t.pick(emissions[step], tags[step], 0));
    if (step > 0) {
      gold = t.add(gold, t.pick(trans, tags[step - 1], tags[step]));
    }
  }
  gold = t.add(gold, t.pick(stop, tags.back(), 0));
  return t.sub(log_z, gold);
}

double crf_log_partition(const std::vector<Vector>& emissions,
                         const CRFParams& p) {
  Tape t;
  std::vector<Var> e;
  e.reserve(emissions.size());
  for (const Vector& v : emissions) {
    e.push_back(t.constant(v));
  }
  Var out = crf_log_partition(t, e, t.constant(p.trans), t.constant(p.start),
                              t.constant(p.stop));
  return t.scalar_value(out);
}

double crf_nll(const std::vector<Vector>& emissions, const CRFParams& p,
               const std::vector<int>& tags) {
  Tape t;
  std::vector<Var> e;
  e.reserve(emissions.size());
  for (const Vector& v : emissions) {
    e.push_back(t.constant(v));
  }
  Var out = crf_nll(t, e, t.constant(p.trans), t.constant(p.start),
                    t.constant(p.stop), tags);
  return t.scalar_value(out);
}

std::pair<std::vector<int>, double> crf_viterbi(
    const std::vector<Vector>& emissions, const CRFParams& p) {
  if (emissions.empty()) {
    throw std::invalid_argument("crf_viterbi: empty emission sequence");
  }
  const Eigen::Index n_tags = p.start.size();
  const std::size_t T = emissions.size();

  Vector best = p.start + emissions[0];
  std::vector<std::vector<int>> back(T, std::vector<int>(n_tags, 0));
  for (std::size_t step = 1; step < T; ++step) {
    Vector next(n_tags);
    for (Eigen::Index j = 0; j < n_tags; ++j) {
      int arg = 0;
      double val = best(0) + p.trans(0, j);
      for (Eigen::Index i = 1; i < n_tags; ++i) {
        const double cand = best(i) + p.trans(i, j);
        if (cand > val) {  // strict: ties keep the lower predecessor
          val = cand;
          arg = static_cast<int>(i);
        }
      }
      next(j) = val + emissions[step](j);
      back[step][j] = arg;
    }
    best = next;
  }
  best += p.stop;

  int arg = 0;
  for (Eigen::Index j = 1; j < n_tags; ++j) {
    if (best(j) > best(arg)) {
      arg = static_cast<int>(j);
    }
  }
  std::vector<int> path(T);
  path[T - 1] = arg;
  for (std::size_t step = T - 1; step > 0; --step) {
    path[step - 1] = back[step][path[step]];
  }
  return {path, best(arg)};
}

}  // namespace metalstm
