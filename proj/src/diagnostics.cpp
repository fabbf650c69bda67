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
#include "metalstm/diagnostics.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>
#include <stdexcept>

#include "metalstm/heads.hpp"

namespace metalstm {

double weight_change(const Matrix& w_t, const Matrix& w_prev, double delta) {
  if (w_t.rows() != w_prev.rows() || w_t.cols() != w_prev.cols()) {
    throw DimensionError("weight_change: shape mismatch");
  }
  return ((w_t - w_prev).cwiseAbs().array() /
          (w_prev.cwiseAbs().array() + delta))
      .mean();
}

namespace {

MetaLSTMParams load_meta(const ParamStore& store, const std::string& prefix) {
  MetaLSTMParams p;
  p.W_m = store.value(prefix + "W_m");
  p.b_m = store.value(prefix + "b_m").col(0);
  p.W_z = store.value(prefix + "W_z");
  return p;
}

BasicLSTMParams load_basic(const ParamStore& store,
                           const std::string& prefix) {
  BasicLSTMParams p;
  p.P_g = store.value(prefix + "P_g");
  p.P_o = store.value(prefix + "P_o");
  p.P_i = store.value(prefix + "P_i");
  p.P_f = store.value(prefix + "P_f");
  p.Q_g = store.value(prefix + "Q_g");
  p.Q_o = store.value(prefix + "Q_o");
  p.Q_i = store.value(prefix + "Q_i");
  p.Q_f = store.value(prefix + "Q_f");
  p.B_g = store.value(prefix + "B_g");
  p.B_o = store.value(prefix + "B_o");
  p.B_i = store.value(prefix + "B_i");
  p.B_f = store.value(prefix + "B_f");
  return p;
}

}  // namespace

std::vector<TraceRecord> trace_sequence(MultiTaskModel& model,
                                        const TaskSpec& task,
                                        const std::vector<std::string>& tokens,
                                        const Vocab& vocab) {
  if (tokens.empty()) {
    throw std::invalid_argument("trace_sequence: empty token sequence");
  }
  if (model.arch != Architecture::kMetaMTL &&
      model.arch != Architecture::kSingleMeta) {
    throw StructureError(
        "trace_sequence: model has no generated weights to trace");
  }
  if (task.is_tagging()) {
    throw StructureError("trace_sequence: expects a classification task");
  }
  const ParamStore& private_store = model.task_store(task.id);
  const ParamStore& meta_store = model.arch == Architecture::kMetaMTL
                                     ? model.shared
                                     : private_store;
  const ParamStore& embed_store =
      model.cfg.per_task_embeddings ? private_store : model.shared;
  const MetaLSTMParams meta = load_meta(meta_store, "meta.");
  const BasicLSTMParams basic = load_basic(private_store, "basic.");
  const Matrix& embed = embed_store.value("embed");
  const Matrix& head_w = private_store.value("head.W");
  const Matrix& head_b = private_store.value("head.b");
  const int h = model.cfg.h;

  CellState ms = zero_state(model.cfg.m);
  CellState bs = zero_state(h);
  Matrix w_prev;
  std::vector<TraceRecord> records;
  records.reserve(tokens.size());
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    const int id = vocab.lookup(tokens[pos]);
    const Vector x = embed.row(id).transpose();
    auto [meta_next, z] = meta_lstm_step(meta, x, bs.h, ms);
    ms = meta_next;
    bs = basic_lstm_step(basic, z, x, bs);

    TraceRecord rec;
    rec.position = static_cast<int>(pos + 1);
    rec.token = tokens[pos];
    auto [w_t, b_t] = make_dynamic_weights(basic, z);
    (void)b_t;
    if (pos > 0) {
      // Blocks are stacked (g, o, i, f); the record orders them i, g, f, o.
      rec.gate_diffs = std::array<double, 4>{
          weight_change(w_t.middleRows(2 * h, h), w_prev.middleRows(2 * h, h)),
          weight_change(w_t.middleRows(0, h), w_prev.middleRows(0, h)),
          weight_change(w_t.middleRows(3 * h, h), w_prev.middleRows(3 * h, h)),
          weight_change(w_t.middleRows(h, h), w_prev.middleRows(h, h))};
    }
    w_prev = std::move(w_t);

    const Vector logits = head_w * bs.h + head_b.col(0);
    rec.score = logits.size() >= 2 ? logits(1) - logits(0) : logits(0);
    records.push_back(std::move(rec));
  }
  return records;
}

void write_trace(std::ostream& os, std::span<const TraceRecord> records) {
  os << "pos\ttoken\tdiff_i\tdiff_g\tdiff_f\tdiff_o\tscore\n";
  char buf[64];
  for (const TraceRecord& rec : records) {
    os << rec.position << "\t" << rec.token;
    if (rec.gate_diffs.has_value()) {
      for (double d : *rec.gate_diffs) {
        std::snprintf(buf, sizeof(buf), "%.6e", d);
        os << "\t" << buf;
      }
    } else {
      os << "\t-\t-\t-\t-";
    }
    std::snprintf(buf, sizeof(buf), "%.6f", rec.score);
    os << "\t" << buf << "\n";
  }
}

int predict_class(MultiTaskModel& model, const TaskSpec& task,
                  const std::vector<int>& tokens) {
  Tape t;
  std::vector<Var> reps = encode_sequence(t, model, task, tokens);
  ParamStore& store = model.task_store(task.id);
  Var logits = t.add(t.matmul(t.param(store, "head.W"), reps.back()),
                     t.param(store, "head.b"));
  const Matrix& v = t.value(logits);
  int best = 0;
  for (Eigen::Index i = 1; i < v.rows(); ++i) {
    if (v(i, 0) > v(best, 0)) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<int> predict_tags(MultiTaskModel& model, const TaskSpec& task,
                              const std::vector<int>& tokens) {
  Tape t;
  std::vector<Var> reps = encode_sequence(t, model, task, tokens);
  const ParamStore& store = model.task_store(task.id);
  CRFParams p;
  p.emit = store.value("head.emit");
  p.trans = store.value("head.trans");
  p.start = store.value("head.start").col(0);
  p.stop = store.value("head.stop").col(0);
  std::vector<Vector> emissions;
  emissions.reserve(reps.size());
  for (Var rep : reps) {
    emissions.push_back(p.emit * t.value(rep).col(0));
  }
  return crf_viterbi(emissions, p).first;
}

std::vector<TagSpan> bio_spans(const std::vector<std::string>& tags) {
  std::vector<TagSpan> spans;
  std::optional<TagSpan> open;
  auto close = [&]() {
    if (open.has_value()) {
      spans.push_back(*open);
      open.reset();
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
      const std::string label = tag.substr(2);
      // A stray I- (no matching open span) is repaired into a B-.
      const bool continues =
          tag[0] == 'I' && open.has_value() && open->label == label;
      if (continues) {
        open->end = i + 1;
      } else {
        close();
        open = TagSpan{label, i, i + 1};
      }
    } else {
      close();
    }
  }
  close();
  return spans;
}

MetricReport evaluate(MultiTaskModel& model, const TaskSpec& task,
                      std::span<const Example> split) {
  MetricReport report;
  if (!task.is_tagging()) {
    std::size_t correct = 0;
    for (const Example& e : split) {
      if (predict_class(model, task, e.tokens) == e.class_label()) {
        ++correct;
      }
    }
    const double acc = split.empty()
                           ? 0.0
                           : static_cast<double>(correct) /
                                 static_cast<double>(split.size());
    report.values.emplace_back("examples", static_cast<double>(split.size()));
    report.values.emplace_back("accuracy", acc);
    return report;
  }

  const auto& tagset = std::get<TaggingHead>(task.head).tagset;
  std::size_t tokens_total = 0;
  std::size_t tokens_correct = 0;
  std::size_t pred_spans = 0, gold_spans = 0, matched = 0;
  for (const Example& e : split) {
    const std::vector<int> pred = predict_tags(model, task, e.tokens);
    const std::vector<int>& gold = e.tag_labels();
    std::vector<std::string> pred_tags, gold_tags;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      tokens_total += 1;
      tokens_correct += pred[i] == gold[i] ? 1 : 0;
      pred_tags.push_back(tagset[static_cast<std::size_t>(pred[i])]);
      gold_tags.push_back(tagset[static_cast<std::size_t>(gold[i])]);
    }
    const auto ps = bio_spans(pred_tags);
    const auto gs = bio_spans(gold_tags);
    pred_spans += ps.size();
    gold_spans += gs.size();
    for (const TagSpan& span : ps) {
      if (std::find(gs.begin(), gs.end(), span) != gs.end()) {
        ++matched;
      }
    }
  }
  const double precision =
      pred_spans == 0 ? 0.0
                      : static_cast<double>(matched) /
                            static_cast<double>(pred_spans);
  const double recall = gold_spans == 0
                            ? 0.0
                            : static_cast<double>(matched) /
                                  static_cast<double>(gold_spans);
  const double f1 = precision + recall > 0.0
                        ? 2.0 * precision * recall / (precision + recall)
                        : 0.0;
  report.values.emplace_back("examples", static_cast<double>(split.size()));
  report.values.emplace_back(
      "token_accuracy",
      tokens_total == 0 ? 0.0
                        : static_cast<double>(tokens_correct) /
                              static_cast<double>(tokens_total));
  report.values.emplace_back("precision", precision);
  report.values.emplace_back("recall", recall);
  report.values.emplace_back("f1", f1);
  return report;
}

double MetricReport::at(const std::string& key) const {
  for (const auto& [k, v] : values) {
    if (k == key) {
      return v;
    }
  }
  throw std::out_of_range("metric '" + key + "' not in report");
}

void write_metrics(std::ostream& os, const MetricReport& report) {
  char buf[64];
  for (const auto& [key, value] : report.values) {
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    os << key << "\t" << buf << "\n";
  }
}

ParamReport param_report(const MultiTaskModel& model) {
  ParamReport report;
  auto add_store = [&](const std::string& store_name,
                       const ParamStore& store) {
    std::int64_t total = 0;
    for (const auto& name : store.names()) {
      const auto& e = store.entry(name);
      ParamReportRow row;
      row.store = store_name;
      row.tensor = name;
      row.rows = e.value.rows();
      row.cols = e.value.cols();
      row.count = static_cast<std::int64_t>(e.value.size());
      row.frozen = e.frozen;
      total += row.count;
      report.rows.push_back(std::move(row));
    }
    report.store_totals[store_name] = total;
    report.grand_total += total;
  };
  add_store("shared", model.shared);
  for (const auto& task_id : model.task_ids) {
    add_store("task/" + task_id, model.privates.at(task_id));
  }

  if (model.arch == Architecture::kMetaMTL ||
      model.arch == Architecture::kSingleMeta) {
    const CellDims dims{model.cfg.d, model.cfg.h, model.cfg.m, model.cfg.z};
    report.basic_cell_factors = count_params(CellKind::kBasic, dims);
    report.basic_cell_with_bias = count_params(CellKind::kBasic, dims, true);
  }
  return report;
}

void write_param_report(std::ostream& os, const ParamReport& report) {
  os << "store\ttensor\tshape\tcount\tfrozen\n";
  for (const ParamReportRow& row : report.rows) {
    os << row.store << "\t" << row.tensor << "\t" << row.rows << "x"
       << row.cols << "\t" << row.count << "\t" << (row.frozen ? 1 : 0)
       << "\n";
  }
  for (const auto& [store_name, total] : report.store_totals) {
    os << "total:" << store_name << "\t" << total << "\n";
  }
  os << "total\t" << report.grand_total << "\n";
  if (report.basic_cell_factors > 0) {
    os << "basic_cell_params_low_rank\t" << report.basic_cell_factors << "\n";
    os << "basic_cell_params_with_bias\t" << report.basic_cell_with_bias
       << "\n";
  }
}

}  // namespace metalstm
