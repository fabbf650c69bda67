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
#include "metalstm/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace metalstm {

Var task_loss_graph(Tape& t, MultiTaskModel& model, const TaskSpec& task,
                    std::span<const Example* const> batch) {
  if (batch.empty()) {
    throw std::invalid_argument("task_loss_graph: empty batch");
  }
  Var total = example_loss(t, model, task, *batch[0]);
  for (std::size_t i = 1; i < batch.size(); ++i) {
    total = t.add(total, example_loss(t, model, task, *batch[i]));
  }
  return t.scale(total, task.lambda / static_cast<double>(batch.size()));
}

double task_loss(MultiTaskModel& model, const TaskSpec& task,
                 std::span<const Example> batch) {
  std::vector<const Example*> ptrs;
  ptrs.reserve(batch.size());
  for (const Example& e : batch) {
    ptrs.push_back(&e);
  }
  Tape t;
  return t.scalar_value(task_loss_graph(t, model, task, ptrs));
}

void adagrad_step(ParamStore& store, double learning_rate, double eps) {
  for (const auto& name : store.names()) {
    auto& e = store.entry(name);
    if (!e.frozen) {
      e.acc.array() += e.grad.array().square();
      e.value.array() -=
          learning_rate * e.grad.array() / (e.acc.array().sqrt() + eps);
    }
    e.grad.setZero();
  }
}

void adagrad_step(ParamStore& store, const TrainConfig& cfg) {
  adagrad_step(store, cfg.learning_rate, cfg.adagrad_eps);
}

void clip_global_norm(const std::vector<ParamStore*>& stores,
                      double max_norm) {
  if (max_norm <= 0.0) {
    return;
  }
  double sq = 0.0;
  for (ParamStore* store : stores) {
    for (const auto& name : store->names()) {
      const auto& e = store->entry(name);
      if (!e.frozen) {
        sq += e.grad.squaredNorm();
      }
    }
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) {
    return;
  }
  const double factor = max_norm / norm;
  for (ParamStore* store : stores) {
    for (const auto& name : store->names()) {
      auto& e = store->entry(name);
      if (!e.frozen) {
        e.grad *= factor;
      }
    }
  }
}

void add_l2_gradients(const std::vector<ParamStore*>& stores, double l2) {
  if (l2 == 0.0) {
    return;
  }
  for (ParamStore* store : stores) {
    for (const auto& name : store->names()) {
      auto& e = store->entry(name);
      if (!e.frozen) {
        e.grad += 2.0 * l2 * e.value;
      }
    }
  }
}

ModelSnapshot snapshot(const MultiTaskModel& model) {
  ModelSnapshot snap;
  for (const auto& name : model.shared.names()) {
    snap.shared.emplace(name, model.shared.value(name));
  }
  for (const auto& [task_id, store] : model.privates) {
    auto& dst = snap.privates[task_id];
    for (const auto& name : store.names()) {
      dst.emplace(name, store.value(name));
    }
  }
  return snap;
}

void restore(MultiTaskModel& model, const ModelSnapshot& snap) {
  for (const auto& [name, value] : snap.shared) {
    model.shared.value(name) = value;
  }
  for (const auto& [task_id, tensors] : snap.privates) {
    ParamStore& store = model.task_store(task_id);
    for (const auto& [name, value] : tensors) {
      store.value(name) = value;
    }
  }
}

double mean_split_loss(MultiTaskModel& model, const TaskSpec& task,
                       std::span<const Example> split) {
  if (split.empty()) {
    throw std::invalid_argument("mean_split_loss: empty split");
  }
  double acc = 0.0;
  for (const Example& e : split) {
    Tape t;
    acc += t.scalar_value(example_loss(t, model, task, e));
  }
  return acc / static_cast<double>(split.size());
}

namespace {

// Seeded shuffle-and-cycle over one task's training split.
class BatchCursor {
 public:
  BatchCursor(std::size_t n, std::uint64_t seed) : rng_(seed) {
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  std::vector<const Example*> next(const std::vector<Example>& pool,
                                   int batch_size) {
    std::vector<const Example*> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
      if (at_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        at_ = 0;
      }
      batch.push_back(&pool[order_[at_++]]);
    }
    return batch;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t at_ = 0;
  std::mt19937_64 rng_;
};

void update_step(MultiTaskModel& model, const std::string& task_id,
                 const TrainConfig& cfg, double learning_rate) {
  std::vector<ParamStore*> stores{&model.shared,
                                  &model.task_store(task_id)};
  clip_global_norm(stores, cfg.clip_norm);
  add_l2_gradients(stores, cfg.l2_reg);
  for (ParamStore* store : stores) {
    adagrad_step(*store, learning_rate, cfg.adagrad_eps);
  }
}

TrainLog run_loop(MultiTaskModel& model, const std::vector<TaskSpec>& tasks,
                  const TrainConfig& cfg, double learning_rate,
                  int max_epochs, int patience) {
  for (const TaskSpec& task : tasks) {
    if (task.corpus.train.empty()) {
      throw std::invalid_argument("training: task '" + task.id +
                                  "' has an empty train split");
    }
  }
  std::size_t total_train = 0;
  for (const TaskSpec& task : tasks) {
    total_train += task.corpus.train.size();
  }
  const int iters_per_epoch = static_cast<int>(
      (total_train + static_cast<std::size_t>(cfg.batch_size) - 1) /
      static_cast<std::size_t>(cfg.batch_size));

  std::mt19937_64 task_rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, tasks.size() - 1);
  std::vector<BatchCursor> cursors;
  cursors.reserve(tasks.size());
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    cursors.emplace_back(tasks[k].corpus.train.size(),
                         mix_seed(cfg.seed, 1000 + k));
  }

  TrainLog log;
  log.seed = cfg.seed;
  double best_dev = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;

  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    double train_acc = 0.0;
    EpochLog el;
    for (const TaskSpec& task : tasks) {
      el.task_draws[task.id] = 0;
    }
    for (int iter = 0; iter < iters_per_epoch; ++iter) {
      const std::size_t k = tasks.size() == 1 ? 0 : pick(task_rng);
      const TaskSpec& task = tasks[k];
      el.task_draws[task.id] += 1;
      auto batch = cursors[k].next(task.corpus.train, cfg.batch_size);
      Tape tape;
      Var loss = task_loss_graph(tape, model, task, batch);
      train_acc += tape.scalar_value(loss);
      tape.backward(loss);
      update_step(model, task.id, cfg, learning_rate);
    }

    el.epoch = epoch;
    el.train_loss = train_acc / iters_per_epoch;
    double dev_acc = 0.0;
    for (const TaskSpec& task : tasks) {
      const double dl = task.corpus.dev.empty()
                            ? 0.0
                            : mean_split_loss(model, task, task.corpus.dev);
      el.dev_loss[task.id] = dl;
      dev_acc += dl;
    }
    const double mean_dev = dev_acc / static_cast<double>(tasks.size());
    log.epochs.push_back(el);

    if (mean_dev < best_dev) {
      best_dev = mean_dev;
      log.best_epoch = epoch;
      log.best_state = snapshot(model);
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (patience > 0 && epochs_since_best >= patience) {
        break;
      }
    }
  }
  return log;
}

}  // namespace

TrainLog joint_train(MultiTaskModel& model, const std::vector<TaskSpec>& tasks,
                     const TrainConfig& cfg) {
  if (tasks.empty()) {
    throw std::invalid_argument("joint_train: no tasks");
  }
  return run_loop(model, tasks, cfg, cfg.learning_rate, cfg.max_epochs,
                  /*patience=*/0);
}

TrainLog fine_tune(MultiTaskModel& model, const TaskSpec& task,
                   const TrainConfig& cfg) {
  (void)model.task_store(task.id);  // unknown task id errors out early
  TrainLog log;
  log.seed = cfg.seed;
  if (cfg.max_epochs <= 0) {
    return log;  // nothing trained, model untouched
  }
  // The pre-fine-tune state is the baseline the early stop may keep.
  ModelSnapshot initial = snapshot(model);
  const double initial_dev =
      task.corpus.dev.empty()
          ? std::numeric_limits<double>::infinity()
          : mean_split_loss(model, task, task.corpus.dev);

  std::vector<TaskSpec> solo{task};
  log = run_loop(model, solo, cfg,
                 cfg.learning_rate * cfg.fine_tune_lr_scale, cfg.max_epochs,
                 cfg.patience);

  const bool improved =
      log.best_epoch > 0 &&
      log.epochs[static_cast<std::size_t>(log.best_epoch - 1)]
              .dev_loss.at(task.id) < initial_dev;
  if (improved) {
    restore(model, log.best_state);
  } else {
    restore(model, initial);
    log.best_epoch = 0;
    log.best_state = std::move(initial);
  }
  return log;
}

TransferResult transfer_train(const Checkpoint& meta_checkpoint,
                              const TaskSpec& new_task,
                              const ModelConfig& cfg,
                              const TrainConfig& train_cfg, int vocab_size) {
  if (cfg.arch != Architecture::kMetaMTL) {
    throw std::invalid_argument(
        "transfer_train: transfer targets the meta-mtl architecture");
  }
  const CheckpointHeader& h = meta_checkpoint.header;
  if (h.d != cfg.d || h.h != cfg.h || h.m != cfg.m || h.z != cfg.z) {
    throw CheckpointError(
        "transfer: checkpoint dims (d=" + std::to_string(h.d) +
        ", h=" + std::to_string(h.h) + ", m=" + std::to_string(h.m) +
        ", z=" + std::to_string(h.z) + ") do not match config (d=" +
        std::to_string(cfg.d) + ", h=" + std::to_string(cfg.h) +
        ", m=" + std::to_string(cfg.m) + ", z=" + std::to_string(cfg.z) +
        ")");
  }

  TransferResult out{build_model({new_task}, cfg, vocab_size), TrainLog{}};
  MultiTaskModel& model = out.model;
  for (const auto& name : model.shared.names()) {
    if (name.rfind("meta.", 0) != 0) {
      continue;
    }
    const Matrix* tensor = meta_checkpoint.find(name);
    if (tensor == nullptr) {
      tensor = meta_checkpoint.find("shared/" + name);
    }
    if (tensor == nullptr) {
      throw CheckpointError("transfer: checkpoint is missing meta tensor '" +
                            name + "'");
    }
    Matrix& dst = model.shared.value(name);
    if (dst.rows() != tensor->rows() || dst.cols() != tensor->cols()) {
      throw CheckpointError(
          "transfer: shape mismatch for '" + name + "': expected " +
          std::to_string(dst.rows()) + "x" + std::to_string(dst.cols()) +
          ", found " + std::to_string(tensor->rows()) + "x" +
          std::to_string(tensor->cols()));
    }
    dst = *tensor;
    model.shared.set_frozen(name, true);
  }
  if (train_cfg.freeze_embeddings_on_transfer &&
      model.shared.has("embed")) {
    model.shared.set_frozen("embed", true);
  }

  out.log = joint_train(model, {new_task}, train_cfg);
  if (out.log.best_epoch > 0) {
    restore(model, out.log.best_state);
  }
  return out;
}

TransferResult transfer_train(const MetaLSTMParams& frozen_meta,
                              const TaskSpec& new_task,
                              const ModelConfig& cfg,
                              const TrainConfig& train_cfg, int vocab_size) {
  Checkpoint ckpt;
  ckpt.header.d = cfg.d;
  ckpt.header.h = cfg.h;
  ckpt.header.m = cfg.m;
  ckpt.header.z = cfg.z;
  ckpt.header.arch = architecture_name(Architecture::kMetaMTL);
  ckpt.tensors.emplace_back("meta.W_m", frozen_meta.W_m);
  ckpt.tensors.emplace_back("meta.b_m", Matrix(frozen_meta.b_m));
  ckpt.tensors.emplace_back("meta.W_z", frozen_meta.W_z);
  return transfer_train(ckpt, new_task, cfg, train_cfg, vocab_size);
}

void write_train_log(std::ostream& os, const TrainLog& log) {
  char buf[64];
  os << "# seed\t" << log.seed << "\n";
  os << "# best_epoch\t" << log.best_epoch << "\n";
  for (const EpochLog& el : log.epochs) {
    os << el.epoch;
    std::snprintf(buf, sizeof(buf), "%.6f", el.train_loss);
    os << "\ttrain\t" << buf;
    for (const auto& [task_id, dev] : el.dev_loss) {
      std::snprintf(buf, sizeof(buf), "%.6f", dev);
      os << "\tdev:" << task_id << "\t" << buf;
    }
    os << "\n";
  }
}

}  // namespace metalstm
