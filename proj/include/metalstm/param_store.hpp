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
#ifndef METALSTM_PARAM_STORE_HPP_
#define METALSTM_PARAM_STORE_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "metalstm/types.hpp"

namespace metalstm {

// Named collection of trainable tensors. Each entry carries its gradient
// slot, the Adagrad accumulator, and a frozen flag. Vectors are stored as
// n-by-1 matrices. Iteration follows insertion order so that updates,
// reports and checkpoints are deterministic.
class ParamStore {
 public:
  struct Entry {
    Matrix value;
    Matrix grad;
    Matrix acc;
    bool frozen = false;
  };

  Matrix& add(const std::string& name, Matrix init);
  bool has(const std::string& name) const { return map_.count(name) != 0; }

  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;

  Matrix& value(const std::string& name) { return entry(name).value; }
  const Matrix& value(const std::string& name) const {
    return entry(name).value;
  }
  Matrix& grad(const std::string& name) { return entry(name).grad; }
  bool frozen(const std::string& name) const { return entry(name).frozen; }
  void set_frozen(const std::string& name, bool flag) {
    entry(name).frozen = flag;
  }
  void freeze_all(bool flag);

  void zero_grads();

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }
  std::int64_t total_params() const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Entry> map_;
};

}  // namespace metalstm

#endif  // METALSTM_PARAM_STORE_HPP_
