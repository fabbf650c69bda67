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

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "metalstm/checkpoint.hpp"
#include "metalstm/data.hpp"
#include "metalstm/training.hpp"

using namespace metalstm;

namespace {

ModelConfig tiny_config(Architecture arch, std::uint64_t seed = 5) {
  ModelConfig cfg;
  cfg.d = 4;
  cfg.h = 5;
  cfg.m = 3;
  cfg.z = 3;
  cfg.arch = arch;
  cfg.init_seed = seed;
  return cfg;
}

TaskSpec tiny_task(const std::string& id, int vocab, int n_train,
                   std::uint64_t seed) {
  TaskSpec t;
  t.id = id;
  t.head = ClassificationHead{2};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tok(2, vocab - 1);
  std::uniform_int_distribution<int> len(3, 6);
  auto gen = [&](int n, std::vector<Example>& dst) {
    for (int i = 0; i < n; ++i) {
      Example e;
      const int L = len(rng);
      for (int j = 0; j < L; ++j) {
        e.tokens.push_back(tok(rng));
      }
      e.label = i % 2;
      dst.push_back(std::move(e));
    }
  };
  gen(n_train, t.corpus.train);
  gen(4, t.corpus.dev);
  gen(4, t.corpus.test);
  return t;
}

bool stores_equal(const ParamStore& a, const ParamStore& b) {
  if (a.names() != b.names()) {
    return false;
  }
  for (const auto& name : a.names()) {
    if (a.value(name) != b.value(name)) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("task_loss: certain prediction means zero loss") {
  auto task = tiny_task("a", 10, 2, 1);
  MultiTaskModel model =
      build_model({task}, tiny_config(Architecture::kSingleLSTM), 10);
  // Force the head to put all probability on class 1 for any input.
  ParamStore& store = model.task_store("a");
  store.value("head.W").setZero();
  store.value("head.b") << -50.0, 50.0;

  Example e;
  e.tokens = {2, 3};
  e.label = 1;
  const double loss = task_loss(model, task, std::vector<Example>{e});
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("task_loss: uniform prediction over two classes costs log 2") {
  auto task = tiny_task("a", 10, 2, 1);
  MultiTaskModel model =
      build_model({task}, tiny_config(Architecture::kSingleLSTM), 10);
  ParamStore& store = model.task_store("a");
  store.value("head.W").setZero();
  store.value("head.b").setZero();

  Example e;
  e.tokens = {2, 3};
  e.label = 0;
  const double loss = task_loss(model, task, std::vector<Example>{e});
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("task_loss scales linearly in lambda") {
  auto task = tiny_task("a", 10, 4, 2);
  MultiTaskModel model =
      build_model({task}, tiny_config(Architecture::kMetaMTL), 10);
  std::vector<Example> batch(task.corpus.train.begin(),
                             task.corpus.train.begin() + 3);
  task.lambda = 1.0;
  const double base = task_loss(model, task, batch);
  task.lambda = 2.0;
  CHECK(task_loss(model, task, batch) ==
        doctest::Approx(2.0 * base).epsilon(1e-12));
}

TEST_CASE("task_loss rejects labels outside the head range") {
  auto task = tiny_task("a", 10, 2, 3);
  MultiTaskModel model =
      build_model({task}, tiny_config(Architecture::kSingleLSTM), 10);
  Example e;
  e.tokens = {2};
  e.label = 7;
  CHECK_THROWS_AS(task_loss(model, task, std::vector<Example>{e}),
                  std::out_of_range);
}

TEST_CASE("adagrad first step moves by about lr in the gradient sign") {
  ParamStore store;
  store.add("p", Matrix::Constant(1, 1, 1.0));
  store.grad("p")(0, 0) = 4.0;
  adagrad_step(store, 0.1, 1e-8);
  CHECK(store.value("p")(0, 0) ==
        doctest::Approx(1.0 - 0.1).epsilon(1e-8));
  CHECK(store.grad("p")(0, 0) == 0.0);  // slots zeroed
  CHECK(store.entry("p").acc(0, 0) == doctest::Approx(16.0));
}

TEST_CASE("adagrad with zero gradient changes nothing") {
  ParamStore store;
  store.add("p", Matrix::Constant(2, 2, 3.0));
  const Matrix before = store.value("p");
  const Matrix acc_before = store.entry("p").acc;
  adagrad_step(store, 0.1, 1e-8);
  CHECK(store.value("p") == before);
  CHECK(store.entry("p").acc == acc_before);
}

TEST_CASE("two equal-gradient adagrad steps shrink by sqrt(2)") {
  ParamStore store;
  store.add("p", Matrix::Constant(1, 1, 0.0));
  store.grad("p")(0, 0) = 2.0;
  adagrad_step(store, 0.1, 0.0);
  const double first = -store.value("p")(0, 0);
  store.grad("p")(0, 0) = 2.0;
  adagrad_step(store, 0.1, 0.0);
  const double second = -store.value("p")(0, 0) - first;
  CHECK(std::abs(second - first / std::sqrt(2.0)) < 1e-9);
}

TEST_CASE("frozen parameters are bitwise constant through updates") {
  ParamStore store;
  store.add("frozen", Matrix::Constant(2, 2, 1.5));
  store.add("live", Matrix::Constant(2, 2, 1.5));
  store.set_frozen("frozen", true);
  const Matrix before = store.value("frozen");
  for (int step = 0; step < 5; ++step) {
    store.grad("frozen").setConstant(3.0);  // even with a stale gradient
    store.grad("live").setConstant(3.0);
    adagrad_step(store, 0.1, 1e-8);
  }
  CHECK(store.value("frozen") == before);
  CHECK(store.value("live") != before);
}

TEST_CASE("clip_global_norm rescales only above the threshold") {
  ParamStore store;
  store.add("a", Matrix::Zero(2, 1));
  store.grad("a") << 3.0, 4.0;  // norm 5
  std::vector<ParamStore*> stores{&store};
  clip_global_norm(stores, 10.0);
  CHECK(store.grad("a")(0, 0) == 3.0);
  clip_global_norm(stores, 2.5);
  CHECK(store.grad("a").norm() == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("joint_train: seeded runs produce byte-identical logs") {
  auto run = [&]() {
    auto t1 = tiny_task("a", 12, 10, 7);
    auto t2 = tiny_task("b", 12, 10, 8);
    MultiTaskModel model = build_model(
        {t1, t2}, tiny_config(Architecture::kMetaMTL, 9), 12);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.max_epochs = 3;
    cfg.seed = 17;
    TrainLog log = joint_train(model, {t1, t2}, cfg);
    std::ostringstream os;
    write_train_log(os, log);
    return os.str();
  };
  const std::string first = run();
  const std::string second = run();
  CHECK(first == second);
  CHECK(first.find("dev:a") != std::string::npos);
  CHECK(first.find("dev:b") != std::string::npos);
}

TEST_CASE("joint_train with one iteration leaves the unsampled task at its "
          "initialization") {
  auto t1 = tiny_task("a", 12, 6, 7);
  auto t2 = tiny_task("b", 12, 6, 8);
  MultiTaskModel model =
      build_model({t1, t2}, tiny_config(Architecture::kMetaMTL, 11), 12);
  const ModelSnapshot init = snapshot(model);

  TrainConfig cfg;
  cfg.batch_size = 12;  // one iteration per epoch
  cfg.max_epochs = 1;
  cfg.seed = 23;
  TrainLog log = joint_train(model, {t1, t2}, cfg);
  REQUIRE(log.epochs.size() == 1);
  const auto& draws = log.epochs[0].task_draws;
  REQUIRE(draws.at("a") + draws.at("b") == 1);
  const std::string sampled = draws.at("a") == 1 ? "a" : "b";
  const std::string idle = sampled == "a" ? "b" : "a";

  for (const auto& [name, value] : init.privates.at(idle)) {
    CHECK(model.task_store(idle).value(name) == value);  // bitwise
  }
  bool sampled_changed = false;
  for (const auto& [name, value] : init.privates.at(sampled)) {
    if (model.task_store(sampled).value(name) != value) {
      sampled_changed = true;
    }
  }
  CHECK(sampled_changed);
}

TEST_CASE("task sampling is uniform within three sigma over 10000 draws") {
  std::vector<TaskSpec> tasks;
  for (int k = 0; k < 4; ++k) {
    tasks.push_back(
        tiny_task("t" + std::to_string(k), 8, 1, 100 + k));
    tasks.back().corpus.dev.resize(1);
  }
  MultiTaskModel model =
      build_model(tasks, tiny_config(Architecture::kSingleLSTM, 3), 8);
  TrainConfig cfg;
  cfg.batch_size = 1;  // 4 iterations per epoch
  cfg.max_epochs = 2500;
  cfg.learning_rate = 0.0;  // sampling contract only, keep the model still
  cfg.seed = 29;
  TrainLog log = joint_train(model, tasks, cfg);

  std::map<std::string, long> counts;
  long total = 0;
  for (const EpochLog& el : log.epochs) {
    for (const auto& [id, n] : el.task_draws) {
      counts[id] += n;
      total += n;
    }
  }
  REQUIRE(total == 10000);
  const double expected = 2500.0;
  const double sigma = std::sqrt(10000.0 * 0.25 * 0.75);
  for (const auto& [id, n] : counts) {
    CHECK(std::abs(static_cast<double>(n) - expected) <= 3.0 * sigma);
  }
}

TEST_CASE("loss on one repeated example is almost monotone without decay") {
  auto task = tiny_task("a", 10, 1, 31);
  task.corpus.dev = task.corpus.train;
  MultiTaskModel model =
      build_model({task}, tiny_config(Architecture::kMetaMTL, 13), 10);
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.max_epochs = 10;
  cfg.l2_reg = 0.0;
  cfg.seed = 37;
  TrainLog log = joint_train(model, {task}, cfg);
  int violations = 0;
  for (std::size_t i = 1; i < log.epochs.size(); ++i) {
    if (log.epochs[i].train_loss > log.epochs[i - 1].train_loss + 1e-12) {
      ++violations;
    }
  }
  CHECK(violations <= 1);
}

TEST_CASE("fine_tune with zero epochs leaves the model untouched") {
  auto task = tiny_task("a", 10, 8, 41);
  MultiTaskModel model =
      build_model({task}, tiny_config(Architecture::kMetaMTL, 17), 10);
  const ModelSnapshot before = snapshot(model);
  TrainConfig cfg;
  cfg.max_epochs = 0;
  fine_tune(model, task, cfg);
  CHECK(stores_equal(model.shared, model.shared));
  for (const auto& [name, value] : before.shared) {
    CHECK(model.shared.value(name) == value);
  }
  for (const auto& [name, value] : before.privates.at("a")) {
    CHECK(model.task_store("a").value(name) == value);
  }
}

TEST_CASE("fine_tune never worsens the task dev loss") {
  auto task = tiny_task("a", 10, 16, 43);
  MultiTaskModel model =
      build_model({task}, tiny_config(Architecture::kMetaMTL, 19), 10);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 4;
  cfg.seed = 47;
  joint_train(model, {task}, cfg);
  const double before = mean_split_loss(model, task, task.corpus.dev);
  cfg.max_epochs = 6;
  fine_tune(model, task, cfg);
  const double after = mean_split_loss(model, task, task.corpus.dev);
  CHECK(after <= before + 1e-12);
}

TEST_CASE("fine_tune rejects unknown task ids") {
  auto task = tiny_task("a", 10, 4, 51);
  MultiTaskModel model =
      build_model({task}, tiny_config(Architecture::kMetaMTL, 23), 10);
  TaskSpec ghost = task;
  ghost.id = "ghost";
  TrainConfig cfg;
  CHECK_THROWS_AS(fine_tune(model, ghost, cfg), StructureError);
}

TEST_CASE("checkpoint round trip is exact and hides no tensors") {
  auto t1 = tiny_task("a", 14, 4, 53);
  MultiTaskModel model =
      build_model({t1}, tiny_config(Architecture::kMetaMTL, 29), 14);
  const std::string path =
      (std::filesystem::temp_directory_path() / "metalstm_ckpt_test.bin")
          .string();
  Checkpoint ckpt = checkpoint_from_model(model, 0x1234);
  save_checkpoint(path, ckpt);
  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.header.arch == "meta-mtl");
  CHECK(loaded.header.vocab_hash == 0x1234);
  REQUIRE(loaded.tensors.size() == ckpt.tensors.size());
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    CHECK(loaded.tensors[i].first == ckpt.tensors[i].first);
    CHECK(loaded.tensors[i].second == ckpt.tensors[i].second);  // bitwise
  }

  // Restoring into a fresh model reproduces every tensor.
  MultiTaskModel other =
      build_model({t1}, tiny_config(Architecture::kMetaMTL, 31), 14);
  restore_model(other, loaded);
  CHECK(stores_equal(other.shared, model.shared));
  CHECK(stores_equal(other.task_store("a"), model.task_store("a")));
  std::filesystem::remove(path);
}

TEST_CASE("corrupted checkpoints fail the checksum") {
  auto t1 = tiny_task("a", 14, 4, 59);
  MultiTaskModel model =
      build_model({t1}, tiny_config(Architecture::kMetaMTL, 37), 14);
  const std::string path =
      (std::filesystem::temp_directory_path() / "metalstm_ckpt_corrupt.bin")
          .string();
  save_checkpoint(path, checkpoint_from_model(model, 1));
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(60);
    const char byte = 0x5a;
    f.write(&byte, 1);
  }
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  std::filesystem::remove(path);
}

TEST_CASE("meta checkpoints hold exactly the shared meta tensors") {
  auto t1 = tiny_task("a", 14, 4, 61);
  auto t2 = tiny_task("b", 14, 4, 62);
  MultiTaskModel model =
      build_model({t1, t2}, tiny_config(Architecture::kMetaMTL, 41), 14);
  Checkpoint meta = meta_checkpoint_from_model(model, 2);
  std::vector<std::string> names;
  for (const auto& [name, tensor] : meta.tensors) {
    names.push_back(name);
  }
  CHECK(names ==
        std::vector<std::string>{"meta.W_m", "meta.b_m", "meta.W_z"});
}

TEST_CASE("transfer_train freezes the meta network bitwise") {
  auto source = tiny_task("src", 14, 12, 63);
  ModelConfig cfg = tiny_config(Architecture::kMetaMTL, 43);
  MultiTaskModel trained = build_model({source}, cfg, 14);
  TrainConfig tcfg;
  tcfg.batch_size = 4;
  tcfg.max_epochs = 2;
  tcfg.seed = 67;
  joint_train(trained, {source}, tcfg);
  Checkpoint meta = meta_checkpoint_from_model(trained, 3);

  auto fresh = tiny_task("new", 14, 12, 64);
  tcfg.max_epochs = 5;
  TransferResult result = transfer_train(meta, fresh, cfg, tcfg, 14);

  for (const auto& [name, tensor] : meta.tensors) {
    CHECK(result.model.shared.frozen(name));
    CHECK(result.model.shared.value(name) == tensor);  // bitwise
  }
  // Everything trainable actually moved.
  CHECK(result.log.epochs.size() > 0);
}

TEST_CASE("transfer_train rejects dimension mismatches, naming both sides") {
  auto source = tiny_task("src", 14, 6, 65);
  ModelConfig cfg = tiny_config(Architecture::kMetaMTL, 47);
  MultiTaskModel trained = build_model({source}, cfg, 14);
  Checkpoint meta = meta_checkpoint_from_model(trained, 4);

  ModelConfig wrong = cfg;
  wrong.m = 7;
  TrainConfig tcfg;
  try {
    transfer_train(meta, source, wrong, tcfg, 14);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("m=3") != std::string::npos);
    CHECK(msg.find("m=7") != std::string::npos);
  }
}

TEST_CASE("freezing every store pins the whole model through training") {
  auto task = tiny_task("a", 10, 8, 71);
  MultiTaskModel model =
      build_model({task}, tiny_config(Architecture::kMetaMTL, 53), 10);
  model.shared.freeze_all(true);
  model.task_store("a").freeze_all(true);
  const ModelSnapshot before = snapshot(model);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 2;
  joint_train(model, {task}, cfg);
  for (const auto& [name, value] : before.shared) {
    CHECK(model.shared.value(name) == value);
  }
  for (const auto& [name, value] : before.privates.at("a")) {
    CHECK(model.task_store("a").value(name) == value);
  }
}
