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
#ifndef METALSTM_DIAGNOSTICS_HPP_
#define METALSTM_DIAGNOSTICS_HPP_

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metalstm/data.hpp"
#include "metalstm/multitask.hpp"

namespace metalstm {

// mean(|W_t - W_prev| / (|W_prev| + delta)). The delta guard keeps zero
// entries of W_prev from turning into poles.
double weight_change(const Matrix& w_t, const Matrix& w_prev,
                     double delta = 1e-8);

// Per-position trace of the generated basic-cell weights along a sequence:
// relative change of each gate block of W(z_t) against the previous step,
// plus the running positive-minus-negative classifier logit. Gate diffs are
// absent at t = 1.
struct TraceRecord {
  int position = 0;  // 1-based
  std::string token;
  // Order: input gate, candidate, forget gate, output gate.
  std::optional<std::array<double, 4>> gate_diffs;
  double score = 0.0;
};

std::vector<TraceRecord> trace_sequence(MultiTaskModel& model,
                                        const TaskSpec& task,
                                        const std::vector<std::string>& tokens,
                                        const Vocab& vocab);

// Tab-separated columns: pos token diff_i diff_g diff_f diff_o score.
void write_trace(std::ostream& os, std::span<const TraceRecord> records);

// Classification: accuracy. Tagging: token accuracy plus span-based
// precision/recall/F1 under BIO conventions (stray I- treated as B-).
struct MetricReport {
  std::vector<std::pair<std::string, double>> values;

  double at(const std::string& key) const;
};

MetricReport evaluate(MultiTaskModel& model, const TaskSpec& task,
                      std::span<const Example> split);

void write_metrics(std::ostream& os, const MetricReport& report);

// Argmax class for one example (classification heads).
int predict_class(MultiTaskModel& model, const TaskSpec& task,
                  const std::vector<int>& tokens);

// Viterbi tag path for one example (tagging heads).
std::vector<int> predict_tags(MultiTaskModel& model, const TaskSpec& task,
                              const std::vector<int>& tokens);

// BIO span extraction used by the F1 metric; exposed for tests.
struct TagSpan {
  std::string label;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  bool operator==(const TagSpan&) const = default;
};
std::vector<TagSpan> bio_spans(const std::vector<std::string>& tags);

struct ParamReportRow {
  std::string store;
  std::string tensor;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::int64_t count = 0;
  bool frozen = false;
};

struct ParamReport {
  std::vector<ParamReportRow> rows;
  std::map<std::string, std::int64_t> store_totals;
  std::int64_t grand_total = 0;
  // Basic-cell accounting for meta architectures: low-rank factors alone
  // and with the bias generators.
  std::int64_t basic_cell_factors = 0;
  std::int64_t basic_cell_with_bias = 0;
};

ParamReport param_report(const MultiTaskModel& model);
void write_param_report(std::ostream& os, const ParamReport& report);

}  // namespace metalstm

#endif  // METALSTM_DIAGNOSTICS_HPP_
