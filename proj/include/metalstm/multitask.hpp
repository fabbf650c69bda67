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
#ifndef METALSTM_MULTITASK_HPP_
#define METALSTM_MULTITASK_HPP_

#include <map>
#include <string>
#include <vector>

#include "metalstm/cells.hpp"
#include "metalstm/data.hpp"
#include "metalstm/param_store.hpp"
#include "metalstm/tape.hpp"

namespace metalstm {

// Sharing architectures. The single-task variants exist so that baselines
// and multi-task models run through one code path.
//   kSSP     stacked shared-private: private cell reads [x_t; h^s_t]
//   kPSP     parallel shared-private: rep_t = [h^k_t; h^s_t]
//   kMetaMTL shared meta network generating each task's basic-cell weights
enum class Architecture {
  kSingleLSTM,
  kSingleMeta,
  kSSP,
  kPSP,
  kMetaMTL,
};

const char* architecture_name(Architecture arch);
Architecture architecture_from_name(const std::string& name);

struct ModelConfig {
  int d = 200;
  int h = 100;
  int m = 40;
  int z = 40;
  Architecture arch = Architecture::kMetaMTL;
  bool per_task_embeddings = false;
  std::uint64_t init_seed = 1;
};

// Shared/private parameter partition. No tensor name appears in both the
// shared store and any private store; every task id owns a head.
struct MultiTaskModel {
  Architecture arch = Architecture::kMetaMTL;
  ModelConfig cfg;
  int vocab_size = 0;
  bool bidirectional = false;  // tagging suites encode both directions
  ParamStore shared;
  std::vector<std::string> task_ids;
  std::map<std::string, ParamStore> privates;

  ParamStore& task_store(const std::string& task_id);
  const ParamStore& task_store(const std::string& task_id) const;
};

// Builds the partition for the given tasks: the shared store holds the
// embeddings (unless per-task) plus the architecture's shared cell; each
// private store holds the task cell and head parameters. All tasks must use
// the same head category; task ids must be unique.
MultiTaskModel build_model(const std::vector<TaskSpec>& tasks,
                           const ModelConfig& cfg, int vocab_size);

// Representation width seen by a task head.
int representation_dim(const MultiTaskModel& model);

// Per-position representations for one token sequence, on the tape, reading
// parameters from the model's stores. For classification suites this is the
// forward encoding; tagging suites concatenate both directions.
std::vector<Var> encode_sequence(Tape& t, MultiTaskModel& model,
                                 const TaskSpec& task,
                                 const std::vector<int>& tokens);

// Unweighted loss of one example (cross entropy or CRF negative
// log-likelihood).
Var example_loss(Tape& t, MultiTaskModel& model, const TaskSpec& task,
                 const Example& example);

// ---------------------------------------------------------------------------
// Value-level architecture steps.

// Stacked shared-private: the shared cell advances on x_t alone, then the
// private cell consumes [x_t; h^s_t] (the fresh shared state).
void ssp_step(const LSTMParams& shared, const LSTMParams& private_k,
              const Vector& x, CellState& s_shared, CellState& s_k);

// Parallel shared-private: both cells advance on x_t; returns the position
// representation [h^k_t; h^s_t].
Vector psp_step(const LSTMParams& shared, const LSTMParams& private_k,
                const Vector& x, CellState& s_shared, CellState& s_k);

// Shared meta driving the task-k basic cell; the meta cell reads the
// private basic state, so its activations are per-task even though its
// parameters are shared.
void meta_mtl_step(const MetaLSTMParams& shared_meta,
                   const BasicLSTMParams& private_k, const Vector& x,
                   CellState& meta_state, CellState& basic_state);

}  // namespace metalstm

#endif  // METALSTM_MULTITASK_HPP_
