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
#include "metalstm/multitask.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "metalstm/heads.hpp"

namespace metalstm {

const char* architecture_name(Architecture arch) {
  switch (arch) {
    case Architecture::kSingleLSTM: return "single-lstm";
    case Architecture::kSingleMeta: return "single-meta";
    case Architecture::kSSP: return "ssp";
    case Architecture::kPSP: return "psp";
    case Architecture::kMetaMTL: return "meta-mtl";
  }
  return "?";
}

Architecture architecture_from_name(const std::string& name) {
  if (name == "single-lstm") return Architecture::kSingleLSTM;
  if (name == "single-meta") return Architecture::kSingleMeta;
  if (name == "ssp") return Architecture::kSSP;
  if (name == "psp") return Architecture::kPSP;
  if (name == "meta-mtl") return Architecture::kMetaMTL;
  throw ParseError("unknown architecture '" + name + "'");
}

ParamStore& MultiTaskModel::task_store(const std::string& task_id) {
  auto it = privates.find(task_id);
  if (it == privates.end()) {
    throw StructureError("model has no task '" + task_id + "'");
  }
  return it->second;
}

const ParamStore& MultiTaskModel::task_store(const std::string& task_id) const {
  auto it = privates.find(task_id);
  if (it == privates.end()) {
    throw StructureError("model has no task '" + task_id + "'");
  }
  return it->second;
}

namespace {

void add_lstm(ParamStore& store, const std::string& prefix,
              const LSTMParams& p) {
  store.add(prefix + "W", p.W);
  store.add(prefix + "b", Matrix(p.b));
}

void add_basic(ParamStore& store, const std::string& prefix,
               const BasicLSTMParams& p) {
  store.add(prefix + "P_g", p.P_g);
  store.add(prefix + "P_o", p.P_o);
  store.add(prefix + "P_i", p.P_i);
  store.add(prefix + "P_f", p.P_f);
  store.add(prefix + "Q_g", p.Q_g);
  store.add(prefix + "Q_o", p.Q_o);
  store.add(prefix + "Q_i", p.Q_i);
  store.add(prefix + "Q_f", p.Q_f);
  store.add(prefix + "B_g", p.B_g);
  store.add(prefix + "B_o", p.B_o);
  store.add(prefix + "B_i", p.B_i);
  store.add(prefix + "B_f", p.B_f);
}

void add_meta(ParamStore& store, const std::string& prefix,
              const MetaLSTMParams& p) {
  store.add(prefix + "W_m", p.W_m);
  store.add(prefix + "b_m", Matrix(p.b_m));
  store.add(prefix + "W_z", p.W_z);
}

std::vector<std::string> directions(bool bidirectional) {
  if (bidirectional) {
    return {"fwd.", "bwd."};
  }
  return {""};
}

bool uses_meta(Architecture arch) {
  return arch == Architecture::kSingleMeta || arch == Architecture::kMetaMTL;
}

LSTMVarParams bind_lstm(Tape& t, ParamStore& store,
                        const std::string& prefix) {
  return LSTMVarParams{t.param(store, prefix + "W"),
                       t.param(store, prefix + "b")};
}

BasicVarParams bind_basic(Tape& t, ParamStore& store,
                          const std::string& prefix) {
  BasicVarParams v;
  v.P_g = t.param(store, prefix + "P_g");
  v.P_o = t.param(store, prefix + "P_o");
  v.P_i = t.param(store, prefix + "P_i");
  v.P_f = t.param(store, prefix + "P_f");
  v.Q_g = t.param(store, prefix + "Q_g");
  v.Q_o = t.param(store, prefix + "Q_o");
  v.Q_i = t.param(store, prefix + "Q_i");
  v.Q_f = t.param(store, prefix + "Q_f");
  v.B_g = t.param(store, prefix + "B_g");
  v.B_o = t.param(store, prefix + "B_o");
  v.B_i = t.param(store, prefix + "B_i");
  v.B_f = t.param(store, prefix + "B_f");
  return v;
}

MetaVarParams bind_meta(Tape& t, ParamStore& store,
                        const std::string& prefix) {
  return MetaVarParams{t.param(store, prefix + "W_m"),
                       t.param(store, prefix + "b_m"),
                       t.param(store, prefix + "W_z")};
}

}  // namespace

int representation_dim(const MultiTaskModel& model) {
  const int base =
      model.arch == Architecture::kPSP ? 2 * model.cfg.h : model.cfg.h;
  return model.bidirectional ? 2 * base : base;
}

MultiTaskModel build_model(const std::vector<TaskSpec>& tasks,
                           const ModelConfig& cfg, int vocab_size) {
  if (tasks.empty()) {
    throw std::invalid_argument("build_model: need at least one task");
  }
  if (cfg.d <= 0 || cfg.h <= 0) {
    throw std::invalid_argument("build_model: dimensions must be positive");
  }
  if (uses_meta(cfg.arch) && (cfg.m <= 0 || cfg.z <= 0)) {
    throw std::invalid_argument(
        "build_model: meta architectures need positive m and z");
  }
  std::set<std::string> ids;
  for (const TaskSpec& task : tasks) {
    if (!ids.insert(task.id).second) {
      throw StructureError("build_model: duplicate task id '" + task.id +
                           "'");
    }
    if (task.is_tagging() != tasks.front().is_tagging()) {
      throw StructureError(
          "build_model: tasks must share one head category per model");
    }
  }

  MultiTaskModel model;
  model.arch = cfg.arch;
  model.cfg = cfg;
  model.vocab_size = vocab_size;
  model.bidirectional = tasks.front().is_tagging();

  std::mt19937_64 rng(cfg.init_seed);
  const CellDims dims{cfg.d, cfg.h, cfg.m, cfg.z};
  const auto dirs = directions(model.bidirectional);

  if (!cfg.per_task_embeddings) {
    model.shared.add("embed", uniform_matrix(vocab_size, cfg.d, -0.1, 0.1,
                                             rng));
  }
  for (const std::string& dir : dirs) {
    switch (cfg.arch) {
      case Architecture::kSSP:
      case Architecture::kPSP:
        add_lstm(model.shared, "shared_lstm." + dir,
                 init_lstm(cfg.d, cfg.h, rng));
        break;
      case Architecture::kMetaMTL:
        add_meta(model.shared, "meta." + dir, init_meta(dims, rng));
        break;
      case Architecture::kSingleLSTM:
      case Architecture::kSingleMeta:
        break;
    }
  }

  const int rep_dim = [&] {
    const int base = cfg.arch == Architecture::kPSP ? 2 * cfg.h : cfg.h;
    return model.bidirectional ? 2 * base : base;
  }();

  for (const TaskSpec& task : tasks) {
    ParamStore store;
    if (cfg.per_task_embeddings) {
      store.add("embed", uniform_matrix(vocab_size, cfg.d, -0.1, 0.1, rng));
    }
    for (const std::string& dir : dirs) {
      switch (cfg.arch) {
        case Architecture::kSingleLSTM:
          add_lstm(store, "lstm." + dir, init_lstm(cfg.d, cfg.h, rng));
          break;
        case Architecture::kSSP:
          add_lstm(store, "lstm." + dir,
                   init_lstm(cfg.d + cfg.h, cfg.h, rng));
          break;
        case Architecture::kPSP:
          add_lstm(store, "lstm." + dir, init_lstm(cfg.d, cfg.h, rng));
          break;
        case Architecture::kSingleMeta:
          add_meta(store, "meta." + dir, init_meta(dims, rng));
          add_basic(store, "basic." + dir, init_basic(dims, rng));
          break;
        case Architecture::kMetaMTL:
          add_basic(store, "basic." + dir, init_basic(dims, rng));
          break;
      }
    }
    if (const auto* c = std::get_if<ClassificationHead>(&task.head)) {
      store.add("head.W", glorot_uniform(c->n_classes, rep_dim, rng));
      store.add("head.b", Matrix::Zero(c->n_classes, 1));
    } else {
      const auto& tagset = std::get<TaggingHead>(task.head).tagset;
      const int n_tags = static_cast<int>(tagset.size());
      if (n_tags == 0) {
        throw StructureError("build_model: empty tagset for task '" +
                             task.id + "'");
      }
      store.add("head.emit", glorot_uniform(n_tags, rep_dim, rng));
      store.add("head.trans", Matrix::Zero(n_tags, n_tags));
      store.add("head.start", Matrix::Zero(n_tags, 1));
      store.add("head.stop", Matrix::Zero(n_tags, 1));
    }
    model.task_ids.push_back(task.id);
    model.privates.emplace(task.id, std::move(store));
  }
  return model;
}

namespace {

std::vector<Var> embed_tokens(Tape& t, Var embed,
                              const std::vector<int>& tokens) {
  std::vector<Var> xs;
  xs.reserve(tokens.size());
  const Eigen::Index vocab = t.value(embed).rows();
  for (int id : tokens) {
    if (id < 0 || id >= vocab) {
      throw std::out_of_range("encode: token index " + std::to_string(id) +
                              " outside embedding table");
    }
    xs.push_back(t.transpose(t.rows(embed, id, 1)));
  }
  return xs;
}

// One direction of the encoder; xs are embedded inputs in running order.
std::vector<Var> encode_direction(Tape& t, MultiTaskModel& model,
                                  ParamStore& private_store,
                                  const std::string& dir,
                                  const std::vector<Var>& xs) {
  const int h = model.cfg.h;
  std::vector<Var> reps;
  reps.reserve(xs.size());
  switch (model.arch) {
    case Architecture::kSingleLSTM: {
      LSTMVarParams cell = bind_lstm(t, private_store, "lstm." + dir);
      VarState s = zero_var_state(t, h);
      for (Var x : xs) {
        s = lstm_step(t, cell.W, cell.b, x, s);
        reps.push_back(s.h);
      }
      break;
    }
    case Architecture::kSSP: {
      LSTMVarParams shared =
          bind_lstm(t, model.shared, "shared_lstm." + dir);
      LSTMVarParams priv = bind_lstm(t, private_store, "lstm." + dir);
      VarState ss = zero_var_state(t, h);
      VarState sk = zero_var_state(t, h);
      for (Var x : xs) {
        ss = lstm_step(t, shared.W, shared.b, x, ss);
        Var stacked_in = t.vconcat({x, ss.h});
        sk = lstm_step(t, priv.W, priv.b, stacked_in, sk);
        reps.push_back(sk.h);
      }
      break;
    }
    case Architecture::kPSP: {
      LSTMVarParams shared =
          bind_lstm(t, model.shared, "shared_lstm." + dir);
      LSTMVarParams priv = bind_lstm(t, private_store, "lstm." + dir);
      VarState ss = zero_var_state(t, h);
      VarState sk = zero_var_state(t, h);
      for (Var x : xs) {
        ss = lstm_step(t, shared.W, shared.b, x, ss);
        sk = lstm_step(t, priv.W, priv.b, x, sk);
        reps.push_back(t.vconcat({sk.h, ss.h}));
      }
      break;
    }
    case Architecture::kSingleMeta:
    case Architecture::kMetaMTL: {
      ParamStore& meta_store = model.arch == Architecture::kMetaMTL
                                   ? model.shared
                                   : private_store;
      MetaVarParams meta = bind_meta(t, meta_store, "meta." + dir);
      BasicVarParams basic = bind_basic(t, private_store, "basic." + dir);
      VarState ms = zero_var_state(t, model.cfg.m);
      VarState bs = zero_var_state(t, h);
      for (Var x : xs) {
        meta_stack_step(t, meta, basic, x, ms, bs);
        reps.push_back(bs.h);
      }
      break;
    }
  }
  return reps;
}

}  // namespace

std::vector<Var> encode_sequence(Tape& t, MultiTaskModel& model,
                                 const TaskSpec& task,
                                 const std::vector<int>& tokens) {
  if (tokens.empty()) {
    throw std::invalid_argument("encode_sequence: empty token sequence");
  }
  ParamStore& private_store = model.task_store(task.id);
  ParamStore& embed_store =
      model.cfg.per_task_embeddings ? private_store : model.shared;
  Var embed = t.param(embed_store, "embed");
  std::vector<Var> xs = embed_tokens(t, embed, tokens);

  if (!model.bidirectional) {
    return encode_direction(t, model, private_store, "", xs);
  }
  std::vector<Var> fwd = encode_direction(t, model, private_store, "fwd.", xs);
  std::vector<Var> rev(xs.rbegin(), xs.rend());
  std::vector<Var> bwd =
      encode_direction(t, model, private_store, "bwd.", rev);
  std::vector<Var> reps;
  reps.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    reps.push_back(t.vconcat({fwd[i], bwd[tokens.size() - 1 - i]}));
  }
  return reps;
}

Var example_loss(Tape& t, MultiTaskModel& model, const TaskSpec& task,
                 const Example& example) {
  std::vector<Var> reps = encode_sequence(t, model, task, example.tokens);
  ParamStore& store = model.task_store(task.id);
  if (!task.is_tagging()) {
    Var logits = t.add(t.matmul(t.param(store, "head.W"), reps.back()),
                       t.param(store, "head.b"));
    return cross_entropy(t, logits, example.class_label());
  }
  Var emit = t.param(store, "head.emit");
  std::vector<Var> emissions;
  emissions.reserve(reps.size());
  for (Var rep : reps) {
    emissions.push_back(t.matmul(emit, rep));
  }
  return crf_nll(t, emissions, t.param(store, "head.trans"),
                 t.param(store, "head.start"), t.param(store, "head.stop"),
                 example.tag_labels());
}

// ---------------------------------------------------------------------------

void ssp_step(const LSTMParams& shared, const LSTMParams& private_k,
              const Vector& x, CellState& s_shared, CellState& s_k) {
  s_shared = lstm_step(shared, x, s_shared);
  Vector stacked(x.size() + s_shared.h.size());
  stacked << x, s_shared.h;
  s_k = lstm_step(private_k, stacked, s_k);
}

Vector psp_step(const LSTMParams& shared, const LSTMParams& private_k,
                const Vector& x, CellState& s_shared, CellState& s_k) {
  s_shared = lstm_step(shared, x, s_shared);
  s_k = lstm_step(private_k, x, s_k);
  Vector rep(s_k.h.size() + s_shared.h.size());
  rep << s_k.h, s_shared.h;
  return rep;
}

void meta_mtl_step(const MetaLSTMParams& shared_meta,
                   const BasicLSTMParams& private_k, const Vector& x,
                   CellState& meta_state, CellState& basic_state) {
  meta_stack_step(shared_meta, private_k, x, meta_state, basic_state);
}

}  // namespace metalstm
