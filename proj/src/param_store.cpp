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
#include "metalstm/param_store.hpp"

namespace metalstm {

Matrix& ParamStore::add(const std::string& name, Matrix init) {
  if (map_.count(name) != 0) {
    throw StructureError("ParamStore: duplicate tensor name '" + name + "'");
  }
  if (!init.allFinite()) {
    throw NumericError("ParamStore: non-finite init for '" + name + "'");
  }
  Entry e;
  e.grad = Matrix::Zero(init.rows(), init.cols());
  e.acc = Matrix::Zero(init.rows(), init.cols());
  e.value = std::move(init);
  auto [it, ok] = map_.emplace(name, std::move(e));
  (void)ok;
  order_.push_back(name);
  return it->second.value;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = map_.find(name);
  if (it == map_.end()) {
    throw StructureError("ParamStore: unknown tensor name '" + name + "'");
  }
  return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) {
    throw StructureError("ParamStore: unknown tensor name '" + name + "'");
  }
  return it->second;
}

void ParamStore::freeze_all(bool flag) {
  for (const auto& name : order_) {
    map_[name].frozen = flag;
  }
}

void ParamStore::zero_grads() {
  for (const auto& name : order_) {
    map_[name].grad.setZero();
  }
}

std::int64_t ParamStore::total_params() const {
  std::int64_t total = 0;
  for (const auto& name : order_) {
    const auto& v = map_.at(name).value;
    total += static_cast<std::int64_t>(v.size());
  }
  return total;
}

}  // namespace metalstm
