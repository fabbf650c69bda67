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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "metalstm/grad_check.hpp"
#include "metalstm/multitask.hpp"
#include "metalstm/training.hpp"
#include "oracles.hpp"

using namespace metalstm;

namespace {

TaskSpec classification_task(const std::string& id, int n_classes = 2) {
  TaskSpec t;
  t.id = id;
  t.head = ClassificationHead{n_classes};
  return t;
}

ModelConfig small_config(Architecture arch) {
  ModelConfig cfg;
  cfg.d = 4;
  cfg.h = 5;
  cfg.m = 3;
  cfg.z = 3;
  cfg.arch = arch;
  cfg.init_seed = 21;
  return cfg;
}

std::vector<int> random_tokens(int len, int vocab, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dist(2, vocab - 1);
  std::vector<int> out(static_cast<std::size_t>(len));
  for (int& t : out) {
    t = dist(rng);
  }
  return out;
}

LSTMParams load_lstm(const ParamStore& store, const std::string& prefix) {
  return LSTMParams{store.value(prefix + "W"),
                    Vector(store.value(prefix + "b").col(0))};
}

}  // namespace

TEST_CASE("build_model partitions parameters by architecture") {
  const int vocab = 30;
  auto tasks = std::vector<TaskSpec>{classification_task("a"),
                                     classification_task("b")};

  SUBCASE("meta-mtl shares exactly the meta network plus embeddings") {
    MultiTaskModel model =
        build_model(tasks, small_config(Architecture::kMetaMTL), vocab);
    std::set<std::string> shared(model.shared.names().begin(),
                                 model.shared.names().end());
    CHECK(shared == std::set<std::string>{"embed", "meta.W_m", "meta.b_m",
                                          "meta.W_z"});
    for (const auto& id : model.task_ids) {
      const ParamStore& store = model.privates.at(id);
      for (const auto& name : store.names()) {
        CHECK_FALSE(shared.count(name));  // partition property
      }
      CHECK(store.has("basic.P_g"));
      CHECK(store.has("head.W"));
      CHECK_FALSE(store.has("meta.W_m"));
    }
  }

  SUBCASE("ssp/psp share one LSTM") {
    MultiTaskModel model =
        build_model(tasks, small_config(Architecture::kSSP), vocab);
    CHECK(model.shared.has("shared_lstm.W"));
    CHECK(model.privates.at("a").has("lstm.W"));
    // Stacked private input is [x; h_s].
    CHECK(model.privates.at("a").value("lstm.W").cols() ==
          5 + 4 + 5);  // h + (d + h)
  }

  SUBCASE("duplicate ids are rejected") {
    auto dup = std::vector<TaskSpec>{classification_task("a"),
                                     classification_task("a")};
    CHECK_THROWS_AS(
        build_model(dup, small_config(Architecture::kMetaMTL), vocab),
        StructureError);
  }

  SUBCASE("mixed head categories are rejected") {
    TaskSpec tagging;
    tagging.id = "t";
    tagging.head = TaggingHead{{"O", "B-X"}};
    auto mixed = std::vector<TaskSpec>{classification_task("a"), tagging};
    CHECK_THROWS_AS(
        build_model(mixed, small_config(Architecture::kMetaMTL), vocab),
        StructureError);
  }
}

TEST_CASE("parameter counts at reference dims: shared 18080, private 24000") {
  ModelConfig cfg;
  cfg.d = 100;
  cfg.h = 100;
  cfg.m = 20;
  cfg.z = 20;
  cfg.arch = Architecture::kMetaMTL;
  auto tasks = std::vector<TaskSpec>{classification_task("only")};
  MultiTaskModel model = build_model(tasks, cfg, 10);

  std::int64_t meta_total = 0;
  for (const auto& name : model.shared.names()) {
    if (name.rfind("meta.", 0) == 0) {
      meta_total += model.shared.value(name).size();
    }
  }
  CHECK(meta_total == 18080);

  const ParamStore& priv = model.privates.at("only");
  std::int64_t factors = 0, bias_gen = 0;
  for (const auto& name : priv.names()) {
    if (name.rfind("basic.P", 0) == 0 || name.rfind("basic.Q", 0) == 0) {
      factors += priv.value(name).size();
    }
    if (name.rfind("basic.B", 0) == 0) {
      bias_gen += priv.value(name).size();
    }
  }
  CHECK(factors == 24000);       // the low-rank accounting
  CHECK(bias_gen == 4 * 100 * 20);  // bias generators tracked separately
}

TEST_CASE("total parameters equal the sum over stores") {
  auto tasks = std::vector<TaskSpec>{classification_task("a"),
                                     classification_task("b"),
                                     classification_task("c")};
  MultiTaskModel model =
      build_model(tasks, small_config(Architecture::kMetaMTL), 25);
  std::int64_t total = model.shared.total_params();
  for (const auto& [id, store] : model.privates) {
    total += store.total_params();
  }
  std::int64_t direct = 0;
  auto count_store = [&](const ParamStore& s) {
    for (const auto& n : s.names()) {
      direct += s.value(n).size();
    }
  };
  count_store(model.shared);
  for (const auto& [id, store] : model.privates) {
    count_store(store);
  }
  CHECK(total == direct);
}

TEST_CASE("ssp_step: zero shared params reduce to a padded private LSTM") {
  std::mt19937_64 rng(3);
  const int d = 3, h = 4;
  LSTMParams shared{Matrix::Zero(4 * h, h + d), Vector::Zero(4 * h)};
  LSTMParams priv{oracles::random_matrix(4 * h, h + (d + h), rng),
                  oracles::random_vector(4 * h, rng)};
  CellState ss = zero_state(h), sk = zero_state(h);
  const Vector x = oracles::random_vector(d, rng);
  ssp_step(shared, priv, x, ss, sk);
  CHECK(ss.h.norm() == 0.0);

  Vector padded(d + h);
  padded << x, Vector::Zero(h);
  CellState want = lstm_step(priv, padded, zero_state(h));
  CHECK((sk.h - want.h).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("ssp_step: shared trajectory is task-independent") {
  std::mt19937_64 rng(5);
  const int d = 3, h = 4;
  LSTMParams shared{oracles::random_matrix(4 * h, h + d, rng),
                    oracles::random_vector(4 * h, rng)};
  LSTMParams priv_a{oracles::random_matrix(4 * h, h + (d + h), rng),
                    oracles::random_vector(4 * h, rng)};
  LSTMParams priv_b{oracles::random_matrix(4 * h, h + (d + h), rng),
                    oracles::random_vector(4 * h, rng)};
  CellState ss_a = zero_state(h), sk_a = zero_state(h);
  CellState ss_b = zero_state(h), sk_b = zero_state(h);
  for (int step = 0; step < 4; ++step) {
    const Vector x = oracles::random_vector(d, rng);
    ssp_step(shared, priv_a, x, ss_a, sk_a);
    ssp_step(shared, priv_b, x, ss_b, sk_b);
    CHECK(ss_a.h == ss_b.h);
    CHECK(ss_a.c == ss_b.c);
  }
}

TEST_CASE("ssp_step matches composing two lstm_step oracles") {
  std::mt19937_64 rng(7);
  const int d = 3, h = 3;
  LSTMParams shared{oracles::random_matrix(4 * h, h + d, rng),
                    oracles::random_vector(4 * h, rng)};
  LSTMParams priv{oracles::random_matrix(4 * h, h + (d + h), rng),
                  oracles::random_vector(4 * h, rng)};
  CellState ss = zero_state(h), sk = zero_state(h);
  const Vector x = oracles::random_vector(d, rng);
  CellState ss_copy = ss, sk_copy = sk;
  ssp_step(shared, priv, x, ss, sk);

  CellState ss_want = oracles::lstm_step_scalar(shared.W, shared.b, x,
                                                ss_copy);
  Vector stacked(d + h);
  stacked << x, ss_want.h;
  CellState sk_want =
      oracles::lstm_step_scalar(priv.W, priv.b, stacked, sk_copy);
  CHECK((ss.h - ss_want.h).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((sk.h - sk_want.h).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("psp_step: representations concatenate private then shared") {
  std::mt19937_64 rng(9);
  const int d = 3, h = 4;
  LSTMParams shared{oracles::random_matrix(4 * h, h + d, rng),
                    oracles::random_vector(4 * h, rng)};

  SUBCASE("identical parameters duplicate the halves") {
    CellState ss = zero_state(h), sk = zero_state(h);
    const Vector x = oracles::random_vector(d, rng);
    Vector rep = psp_step(shared, shared, x, ss, sk);
    CHECK((rep.head(h) - rep.tail(h)).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("zero private params zero the first half") {
    LSTMParams zero_priv{Matrix::Zero(4 * h, h + d), Vector::Zero(4 * h)};
    CellState ss = zero_state(h), sk = zero_state(h);
    const Vector x = oracles::random_vector(d, rng);
    Vector rep = psp_step(shared, zero_priv, x, ss, sk);
    CHECK(rep.head(h).norm() == 0.0);
    CHECK(rep.tail(h).norm() > 0.0);
  }

  SUBCASE("random case matches two independent runs") {
    LSTMParams priv{oracles::random_matrix(4 * h, h + d, rng),
                    oracles::random_vector(4 * h, rng)};
    std::vector<Vector> xs;
    for (int i = 0; i < 5; ++i) {
      xs.push_back(oracles::random_vector(d, rng));
    }
    CellState ss = zero_state(h), sk = zero_state(h);
    std::vector<Vector> reps;
    for (const Vector& x : xs) {
      reps.push_back(psp_step(shared, priv, x, ss, sk));
    }
    auto shared_run = run_sequence(shared, xs);
    auto priv_run = run_sequence(priv, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      CHECK((reps[i].head(h) - priv_run.hs[i]).lpNorm<Eigen::Infinity>() ==
            0.0);
      CHECK((reps[i].tail(h) - shared_run.hs[i]).lpNorm<Eigen::Infinity>() ==
            0.0);
    }
  }
}

TEST_CASE("meta_mtl_step with one task reduces to meta_stack_step") {
  std::mt19937_64 rng(11);
  CellDims dims{3, 4, 2, 2};
  MetaLSTMParams mp = init_meta(dims, rng);
  BasicLSTMParams bp = init_basic(dims, rng);

  CellState ms_a = zero_state(dims.m), bs_a = zero_state(dims.h);
  CellState ms_b = zero_state(dims.m), bs_b = zero_state(dims.h);
  for (int step = 0; step < 5; ++step) {
    const Vector x = oracles::random_vector(dims.d, rng);
    meta_mtl_step(mp, bp, x, ms_a, bs_a);
    meta_stack_step(mp, bp, x, ms_b, bs_b);
    CHECK(bs_a.h == bs_b.h);  // bitwise
    CHECK(ms_a.h == ms_b.h);
  }
}

TEST_CASE("two tasks with shared meta produce different z trajectories") {
  std::mt19937_64 rng(13);
  CellDims dims{3, 4, 2, 2};
  MetaLSTMParams mp = init_meta(dims, rng);
  BasicLSTMParams bp_a = init_basic(dims, rng);
  BasicLSTMParams bp_b = init_basic(dims, rng);

  CellState ms_a = zero_state(dims.m), bs_a = zero_state(dims.h);
  CellState ms_b = zero_state(dims.m), bs_b = zero_state(dims.h);
  bool diverged = false;
  for (int step = 0; step < 4; ++step) {
    const Vector x = oracles::random_vector(dims.d, rng);
    auto [ms_a2, z_a] = meta_lstm_step(mp, x, bs_a.h, ms_a);
    auto [ms_b2, z_b] = meta_lstm_step(mp, x, bs_b.h, ms_b);
    ms_a = ms_a2;
    ms_b = ms_b2;
    bs_a = basic_lstm_step(bp_a, z_a, x, bs_a);
    bs_b = basic_lstm_step(bp_b, z_b, x, bs_b);
    if ((z_a - z_b).norm() > 1e-9) {
      diverged = true;
    }
  }
  CHECK(diverged);
}

TEST_CASE("single-task meta-mtl model reproduces raw cell trajectories "
          "bit for bit") {
  const ModelConfig cfg = small_config(Architecture::kMetaMTL);
  auto tasks = std::vector<TaskSpec>{classification_task("only")};
  MultiTaskModel model = build_model(tasks, cfg, 20);

  std::mt19937_64 rng(17);
  std::vector<int> tokens = random_tokens(6, 20, rng);

  // Tape path through the model.
  Tape t;
  std::vector<Var> reps = encode_sequence(t, model, tasks[0], tokens);

  // Value path straight through cells, reading the same tensors.
  const ParamStore& shared = model.shared;
  const ParamStore& priv = model.privates.at("only");
  MetaLSTMParams mp{shared.value("meta.W_m"),
                    Vector(shared.value("meta.b_m").col(0)),
                    shared.value("meta.W_z")};
  BasicLSTMParams bp{
      priv.value("basic.P_g"), priv.value("basic.P_o"),
      priv.value("basic.P_i"), priv.value("basic.P_f"),
      priv.value("basic.Q_g"), priv.value("basic.Q_o"),
      priv.value("basic.Q_i"), priv.value("basic.Q_f"),
      priv.value("basic.B_g"), priv.value("basic.B_o"),
      priv.value("basic.B_i"), priv.value("basic.B_f")};
  const Matrix& embed = shared.value("embed");
  CellState ms = zero_state(cfg.m), bs = zero_state(cfg.h);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Vector x = embed.row(tokens[i]).transpose();
    meta_stack_step(mp, bp, x, ms, bs);
    CHECK(t.value(reps[i]).col(0) == bs.h);  // bitwise
  }
}

TEST_CASE("private update leaves other tasks' outputs unchanged") {
  auto tasks = std::vector<TaskSpec>{classification_task("a"),
                                     classification_task("b")};
  MultiTaskModel model =
      build_model(tasks, small_config(Architecture::kMetaMTL), 20);
  std::mt19937_64 rng(19);
  std::vector<int> tokens = random_tokens(5, 20, rng);

  auto output_of = [&](const TaskSpec& task) {
    Tape t;
    auto reps = encode_sequence(t, model, task, tokens);
    return Matrix(t.value(reps.back()));
  };
  const Matrix before_a = output_of(tasks[0]);
  const Matrix before_b = output_of(tasks[1]);

  // Perturb task a's private parameters arbitrarily.
  ParamStore& store_a = model.task_store("a");
  for (const auto& name : store_a.names()) {
    store_a.value(name).array() += 0.25;
  }
  CHECK(output_of(tasks[0]) != before_a);
  CHECK(output_of(tasks[1]) == before_b);  // exact equality
}

TEST_CASE("shared gradients accumulate from every task; private gradients "
          "stay local") {
  auto tasks = std::vector<TaskSpec>{classification_task("a"),
                                     classification_task("b")};
  MultiTaskModel model =
      build_model(tasks, small_config(Architecture::kMetaMTL), 20);
  std::mt19937_64 rng(23);

  Example ex_a{random_tokens(5, 20, rng), 1};
  Example ex_b{random_tokens(5, 20, rng), 0};

  model.shared.zero_grads();
  model.task_store("a").zero_grads();
  model.task_store("b").zero_grads();

  Tape t;
  Var loss = example_loss(t, model, tasks[0], ex_a);
  t.backward(loss);
  const double shared_after_a = model.shared.grad("meta.W_m").norm();
  CHECK(shared_after_a > 0.0);
  CHECK(model.task_store("a").grad("basic.P_g").norm() > 0.0);
  CHECK(model.task_store("b").grad("basic.P_g").norm() == 0.0);

  Tape t2;
  Var loss_b = example_loss(t2, model, tasks[1], ex_b);
  t2.backward(loss_b);
  CHECK(model.shared.grad("meta.W_m").norm() > shared_after_a);
  CHECK(model.task_store("b").grad("basic.P_g").norm() > 0.0);
}

TEST_CASE("encode_sequence rejects empty inputs") {
  auto tasks = std::vector<TaskSpec>{classification_task("a")};
  MultiTaskModel model =
      build_model(tasks, small_config(Architecture::kSingleLSTM), 20);
  Tape t;
  CHECK_THROWS_AS(encode_sequence(t, model, tasks[0], {}),
                  std::invalid_argument);
}

TEST_CASE("full model gradients pass grad_check per architecture") {
  std::mt19937_64 rng(29);
  for (Architecture arch :
       {Architecture::kSingleLSTM, Architecture::kSingleMeta,
        Architecture::kSSP, Architecture::kPSP, Architecture::kMetaMTL}) {
    auto tasks = std::vector<TaskSpec>{classification_task("a")};
    MultiTaskModel model = build_model(tasks, small_config(arch), 15);
    Example ex{random_tokens(4, 15, rng), 1};
    std::vector<ParamStore*> stores{&model.shared, &model.task_store("a")};
    GradCheckConfig cfg;
    cfg.samples_per_tensor = 3;
    cfg.eps = 1e-4;
    const double err = grad_check(
        [&](Tape& t) { return example_loss(t, model, tasks[0], ex); },
        stores, cfg);
    INFO(architecture_name(arch));
    CHECK(err < 1e-4);
  }
}

TEST_CASE("bidirectional tagging model encodes and differentiates") {
  TaskSpec task;
  task.id = "tag";
  task.head = TaggingHead{{"O", "B-X", "I-X"}};
  ModelConfig cfg = small_config(Architecture::kMetaMTL);
  MultiTaskModel model = build_model({task}, cfg, 15);
  CHECK(model.bidirectional);
  CHECK(representation_dim(model) == 2 * cfg.h);

  std::mt19937_64 rng(37);
  Example ex;
  ex.tokens = random_tokens(4, 15, rng);
  ex.label = std::vector<int>{0, 1, 2, 0};

  std::vector<ParamStore*> stores{&model.shared, &model.task_store("tag")};
  GradCheckConfig gcfg;
  gcfg.samples_per_tensor = 2;
  // At 1e-5 the fresh model's smallest gate-path gradients (~1e-8) sit at
  // the finite-difference roundoff floor; 1e-4 keeps the probe meaningful.
  gcfg.eps = 1e-4;
  const double err = grad_check(
      [&](Tape& t) { return example_loss(t, model, task, ex); }, stores,
      gcfg);
  CHECK(err < 1e-4);
}
