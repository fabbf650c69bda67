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
#ifndef METALSTM_TAPE_HPP_
#define METALSTM_TAPE_HPP_

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metalstm/param_store.hpp"
#include "metalstm/types.hpp"

namespace metalstm {

// Handle into a Tape. Invalid until produced by a tape, and only meaningful
// on the tape that produced it.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over dense matrices. Every operation appends one
// node holding its value; backward() replays the record once in reverse and
// accumulates gradients into the parents, then flushes parameter-leaf
// gradients into their ParamStore slots (frozen entries stay zero).
//
// Every operation verifies its result is finite and throws NumericError
// naming the operation otherwise. Shape mismatches throw DimensionError.
// A Tape is single-threaded and never shared across threads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Var constant(Matrix value);
  template <typename Derived>
  Var constant(const Eigen::MatrixBase<Derived>& value) {
    return constant(Matrix(value));
  }
  Var scalar(double value);
  // Leaf bound to a store entry; cached, so repeated binds of the same
  // entry return the same node and its gradient accumulates across uses.
  Var param(ParamStore& store, const std::string& name);

  // Primitives.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);  // elementwise product
  Var matmul(Var a, Var b);
  Var scale(Var a, double s);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var vconcat(std::span<const Var> parts);  // stack by rows
  Var vconcat(std::initializer_list<Var> parts);
  Var rows(Var a, Eigen::Index start, Eigen::Index count);
  Var transpose(Var a);
  Var col_scale(Var a, Var v);  // a * diag(v)
  Var broadcast_cols(Var v, Eigen::Index cols);  // n-by-1 -> n-by-cols
  Var colwise_logsumexp(Var a);                  // r-by-c -> 1-by-c
  Var logsumexp(Var a);                          // all entries -> 1-by-1
  Var pick(Var a, Eigen::Index r, Eigen::Index c);  // single entry -> 1-by-1
  Var sum(Var a);                                   // -> 1-by-1

  const Matrix& value(Var v) const;
  double scalar_value(Var v) const;  // requires a 1-by-1 value
  // Gradient accumulated at v; zero matrix if v was not on the backward path.
  const Matrix& grad(Var v);

  // Reverse sweep from a 1-by-1 root (seeded with 1), then flush into the
  // bound stores. Gradient slots accumulate (+=); callers zero them between
  // independent passes.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  enum class Op : std::uint8_t {
    kConstant,
    kParam,
    kAdd,
    kSub,
    kCMul,
    kMatMul,
    kScale,
    kSigmoid,
    kTanh,
    kVConcat,
    kRows,
    kTranspose,
    kColScale,
    kBroadcastCols,
    kColLogSumExp,
    kLogSumExp,
    kPick,
    kSum,
  };

  struct Node {
    Matrix value;
    Matrix grad;  // empty until touched by backward
    Op op = Op::kConstant;
    std::int32_t a = -1;
    std::int32_t b = -1;
    std::int32_t i0 = 0;  // op payload: slice start / pick row / binding idx
    std::int32_t i1 = 0;  // op payload: slice count / pick col / concat count
    double d0 = 0.0;      // scale factor
  };

  struct ParamBinding {
    ParamStore* store = nullptr;
    std::string name;
  };

  static const char* op_name(Op op);
  Var push(Node node, const char* op);
  const Node& node(Var v) const;
  Matrix& ensure_grad(std::int32_t id);
  void check_same_shape(Var a, Var b, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<ParamBinding> bindings_;
  std::vector<std::int32_t> param_nodes_;
  std::vector<std::int32_t> concat_children_;
  std::map<std::pair<const ParamStore*, std::string>, Var> param_cache_;
};

// Runs a graph-building closure on the tape and returns the scalar loss
// together with the root var for a later backward().
struct ForwardResult {
  double value = 0.0;
  Var root;
};
ForwardResult forward_scalar(Tape& tape,
                             const std::function<Var(Tape&)>& graph);

}  // namespace metalstm

#endif  // METALSTM_TAPE_HPP_
