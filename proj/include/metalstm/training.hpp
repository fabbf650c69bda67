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
#ifndef METALSTM_TRAINING_HPP_
#define METALSTM_TRAINING_HPP_

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "metalstm/checkpoint.hpp"
#include "metalstm/multitask.hpp"

namespace metalstm {

struct TrainConfig {
  double learning_rate = 0.1;
  double l2_reg = 1e-5;
  int batch_size = 16;
  int max_epochs = 20;
  std::uint64_t seed = 1;
  double adagrad_eps = 1e-8;
  double clip_norm = 5.0;  // global-norm gradient clip, 0 disables
  double fine_tune_lr_scale = 0.1;
  int patience = 5;
  bool freeze_embeddings_on_transfer = false;
};

// lambda_k times the batch-mean loss. L2 regularization is applied as decay
// inside the update step, not in this value.
Var task_loss_graph(Tape& t, MultiTaskModel& model, const TaskSpec& task,
                    std::span<const Example* const> batch);
double task_loss(MultiTaskModel& model, const TaskSpec& task,
                 std::span<const Example> batch);

// Adagrad: acc += g^2; p -= lr * g / (sqrt(acc) + eps). Frozen entries are
// untouched. Gradient slots are zeroed afterwards.
void adagrad_step(ParamStore& store, double learning_rate, double eps);
void adagrad_step(ParamStore& store, const TrainConfig& cfg);

// Scales gradients across the stores so their joint norm is at most
// max_norm; no-op when max_norm <= 0.
void clip_global_norm(const std::vector<ParamStore*>& stores,
                      double max_norm);

// Gradient of l2 * ||p||^2, added ahead of the Adagrad update.
void add_l2_gradients(const std::vector<ParamStore*>& stores, double l2);

// Full parameter image of a model, for best-epoch snapshots and freeze
// verification.
struct ModelSnapshot {
  std::map<std::string, Matrix> shared;
  std::map<std::string, std::map<std::string, Matrix>> privates;
};
ModelSnapshot snapshot(const MultiTaskModel& model);
void restore(MultiTaskModel& model, const ModelSnapshot& snap);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  std::map<std::string, double> dev_loss;      // per task id, unweighted mean
  std::map<std::string, double> dev_accuracy;  // classification / token level
  std::map<std::string, int> task_draws;  // iterations that sampled the task
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;  // 1-based; -1 when no epoch ran
  ModelSnapshot best_state;
  std::uint64_t seed = 0;
};

// Fixed-format text dump, byte-identical across runs with equal seeds.
void write_train_log(std::ostream& os, const TrainLog& log);

// The stochastic multi-task loop: per iteration, pick a task uniformly,
// draw a mini-batch from it, take a gradient step on the shared store plus
// that task's private store. Logs mean train loss and per-task dev loss
// each epoch. Tasks converge at different epochs and converged tasks'
// cross-entropy drifts up on overconfident mistakes, so the best epoch is
// the one with the highest mean dev accuracy (ties broken by lower mean
// dev loss). The model is left at its final (not best) parameters.
TrainLog joint_train(MultiTaskModel& model, const std::vector<TaskSpec>& tasks,
                     const TrainConfig& cfg);

// Mean loss and accuracy over a split in one forward pass per example
// (whole-sequence accuracy for classification, token accuracy for tagging).
struct SplitEval {
  double loss = 0.0;
  double accuracy = 0.0;
};
SplitEval eval_split(MultiTaskModel& model, const TaskSpec& task,
                     std::span<const Example> split);

// Task-local training at a reduced learning rate with dev-loss early
// stopping; restores the best state (which may be the starting point) into
// the model before returning.
TrainLog fine_tune(MultiTaskModel& model, const TaskSpec& task,
                   const TrainConfig& cfg);

struct TransferResult {
  MultiTaskModel model;
  TrainLog log;
};

// Builds a fresh meta-mtl model for the new task, installs the checkpoint's
// meta tensors into the shared store, freezes them, and trains everything
// else. The frozen tensors are bitwise unchanged afterwards. Accepts a
// meta-only checkpoint or a full one (whose shared meta tensors are used).
TransferResult transfer_train(const Checkpoint& meta_checkpoint,
                              const TaskSpec& new_task,
                              const ModelConfig& cfg,
                              const TrainConfig& train_cfg, int vocab_size);

// Convenience for unidirectional classification transfer.
TransferResult transfer_train(const MetaLSTMParams& frozen_meta,
                              const TaskSpec& new_task,
                              const ModelConfig& cfg,
                              const TrainConfig& train_cfg, int vocab_size);

double mean_split_loss(MultiTaskModel& model, const TaskSpec& task,
                       std::span<const Example> split);

}  // namespace metalstm

#endif  // METALSTM_TRAINING_HPP_
