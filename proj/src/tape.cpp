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
#include "metalstm/tape.hpp"

#include <cmath>
#include <sstream>

namespace metalstm {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

}  // namespace

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParam: return "param";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kCMul: return "cmul";
    case Op::kMatMul: return "matmul";
    case Op::kScale: return "scale";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kVConcat: return "vconcat";
    case Op::kRows: return "rows";
    case Op::kTranspose: return "transpose";
    case Op::kColScale: return "col_scale";
    case Op::kBroadcastCols: return "broadcast_cols";
    case Op::kColLogSumExp: return "colwise_logsumexp";
    case Op::kLogSumExp: return "logsumexp";
    case Op::kPick: return "pick";
    case Op::kSum: return "sum";
  }
  return "?";
}

Var Tape::push(Node node, const char* op) {
  if (!node.value.allFinite()) {
    throw NumericError(std::string("tape: non-finite result in op '") + op +
                       "'");
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw StructureError("tape: invalid var handle");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

Matrix& Tape::ensure_grad(std::int32_t id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Tape::check_same_shape(Var a, Var b, const char* op) const {
  const Matrix& va = node(a).value;
  const Matrix& vb = node(b).value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) {
    throw DimensionError(std::string("tape: ") + op + " shape mismatch " +
                         shape_str(va) + " vs " + shape_str(vb));
  }
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n), "constant");
}



Var Tape::scalar(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

Var Tape::param(ParamStore& store, const std::string& name) {
  auto key = std::make_pair(static_cast<const ParamStore*>(&store), name);
  auto it = param_cache_.find(key);
  if (it != param_cache_.end()) {
    return it->second;
  }
  Node n;
  n.op = Op::kParam;
  n.value = store.value(name);
  n.i0 = static_cast<std::int32_t>(bindings_.size());
  bindings_.push_back(ParamBinding{&store, name});
  Var v = push(std::move(n), "param");
  param_nodes_.push_back(v.id);
  param_cache_.emplace(std::move(key), v);
  return v;
}

Var Tape::add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = node(a).value + node(b).value;
  return push(std::move(n), "add");
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.value = node(a).value - node(b).value;
  return push(std::move(n), "sub");
}

Var Tape::cmul(Var a, Var b) {
  check_same_shape(a, b, "cmul");
  Node n;
  n.op = Op::kCMul;
  n.a = a.id;
  n.b = b.id;
  n.value = node(a).value.cwiseProduct(node(b).value);
  return push(std::move(n), "cmul");
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& va = node(a).value;
  const Matrix& vb = node(b).value;
  if (va.cols() != vb.rows()) {
    throw DimensionError("tape: matmul shape mismatch " + shape_str(va) +
                         " * " + shape_str(vb));
  }
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.value.noalias() = va * vb;
  return push(std::move(n), "matmul");
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.d0 = s;
  n.value = node(a).value * s;
  return push(std::move(n), "scale");
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a.id;
  n.value = node(a).value.unaryExpr(
      [](double x) { return metalstm::sigmoid(x); });
  return push(std::move(n), "sigmoid");
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a.id;
  n.value = node(a).value.array().tanh();
  return push(std::move(n), "tanh");
}

Var Tape::vconcat(std::span<const Var> parts) {
  if (parts.empty()) {
    throw DimensionError("tape: vconcat of zero parts");
  }
  Eigen::Index rows = 0;
  const Eigen::Index cols = node(parts[0]).value.cols();
  for (Var p : parts) {
    const Matrix& v = node(p).value;
    if (v.cols() != cols) {
      throw DimensionError("tape: vconcat column mismatch");
    }
    rows += v.rows();
  }
  Node n;
  n.op = Op::kVConcat;
  n.i0 = static_cast<std::int32_t>(concat_children_.size());
  n.i1 = static_cast<std::int32_t>(parts.size());
  n.value.resize(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    const Matrix& v = node(p).value;
    n.value.middleRows(at, v.rows()) = v;
    at += v.rows();
    concat_children_.push_back(p.id);
  }
  return push(std::move(n), "vconcat");
}

Var Tape::vconcat(std::initializer_list<Var> parts) {
  return vconcat(std::span<const Var>(parts.begin(), parts.size()));
}

Var Tape::rows(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& va = node(a).value;
  if (start < 0 || count < 0 || start + count > va.rows()) {
    throw DimensionError("tape: rows slice out of range");
  }
  Node n;
  n.op = Op::kRows;
  n.a = a.id;
  n.i0 = static_cast<std::int32_t>(start);
  n.i1 = static_cast<std::int32_t>(count);
  n.value = va.middleRows(start, count);
  return push(std::move(n), "rows");
}

Var Tape::transpose(Var a) {
  Node n;
  n.op = Op::kTranspose;
  n.a = a.id;
  n.value = node(a).value.transpose();
  return push(std::move(n), "transpose");
}

Var Tape::col_scale(Var a, Var v) {
  const Matrix& va = node(a).value;
  const Matrix& vv = node(v).value;
  if (vv.cols() != 1 || vv.rows() != va.cols()) {
    throw DimensionError("tape: col_scale expects diag vector of length " +
                         std::to_string(va.cols()) + ", got " +
                         shape_str(vv));
  }
  Node n;
  n.op = Op::kColScale;
  n.a = a.id;
  n.b = v.id;
  n.value = va * vv.col(0).asDiagonal();
  return push(std::move(n), "col_scale");
}

Var Tape::broadcast_cols(Var v, Eigen::Index cols) {
  const Matrix& vv = node(v).value;
  if (vv.cols() != 1 || cols <= 0) {
    throw DimensionError("tape: broadcast_cols expects a column vector");
  }
  Node n;
  n.op = Op::kBroadcastCols;
  n.a = v.id;
  n.i0 = static_cast<std::int32_t>(cols);
  n.value = vv.col(0).replicate(1, cols);
  return push(std::move(n), "broadcast_cols");
}

Var Tape::colwise_logsumexp(Var a) {
  const Matrix& va = node(a).value;
  Node n;
  n.op = Op::kColLogSumExp;
  n.a = a.id;
  n.value.resize(1, va.cols());
  for (Eigen::Index j = 0; j < va.cols(); ++j) {
    n.value(0, j) = log_sum_exp(va.col(j));
  }
  return push(std::move(n), "colwise_logsumexp");
}

Var Tape::logsumexp(Var a) {
  const Matrix& va = node(a).value;
  Node n;
  n.op = Op::kLogSumExp;
  n.a = a.id;
  n.value.resize(1, 1);
  n.value(0, 0) = log_sum_exp(va.reshaped());
  return push(std::move(n), "logsumexp");
}

Var Tape::pick(Var a, Eigen::Index r, Eigen::Index c) {
  const Matrix& va = node(a).value;
  if (r < 0 || c < 0 || r >= va.rows() || c >= va.cols()) {
    throw DimensionError("tape: pick index out of range");
  }
  Node n;
  n.op = Op::kPick;
  n.a = a.id;
  n.i0 = static_cast<std::int32_t>(r);
  n.i1 = static_cast<std::int32_t>(c);
  n.value.resize(1, 1);
  n.value(0, 0) = va(r, c);
  return push(std::move(n), "pick");
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.value.resize(1, 1);
  n.value(0, 0) = node(a).value.sum();
  return push(std::move(n), "sum");
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar_value(Var v) const {
  const Matrix& m = node(v).value;
  if (m.rows() != 1 || m.cols() != 1) {
    throw DimensionError("tape: scalar_value on non-scalar " + shape_str(m));
  }
  return m(0, 0);
}

const Matrix& Tape::grad(Var v) {
  node(v);  // bounds check
  return ensure_grad(v.id);
}

void Tape::backward(Var root) {
  const Node& r = node(root);
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw DimensionError("tape: backward root must be 1x1");
  }
  ensure_grad(root.id)(0, 0) += 1.0;

  for (std::int32_t id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) {
      continue;  // not on the path from the root
    }
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::kConstant:
      case Op::kParam:
        break;
      case Op::kAdd:
        ensure_grad(n.a) += g;
        ensure_grad(n.b) += g;
        break;
      case Op::kSub:
        ensure_grad(n.a) += g;
        ensure_grad(n.b) -= g;
        break;
      case Op::kCMul:
        ensure_grad(n.a) += g.cwiseProduct(nodes_[n.b].value);
        ensure_grad(n.b) += g.cwiseProduct(nodes_[n.a].value);
        break;
      case Op::kMatMul:
        ensure_grad(n.a).noalias() += g * nodes_[n.b].value.transpose();
        ensure_grad(n.b).noalias() += nodes_[n.a].value.transpose() * g;
        break;
      case Op::kScale:
        ensure_grad(n.a) += n.d0 * g;
        break;
      case Op::kSigmoid:
        ensure_grad(n.a).array() +=
            g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::kTanh:
        ensure_grad(n.a).array() +=
            g.array() * (1.0 - n.value.array().square());
        break;
      case Op::kVConcat: {
        Eigen::Index at = 0;
        for (std::int32_t k = 0; k < n.i1; ++k) {
          const std::int32_t child =
              concat_children_[static_cast<std::size_t>(n.i0 + k)];
          const Eigen::Index child_rows = nodes_[child].value.rows();
          ensure_grad(child) += g.middleRows(at, child_rows);
          at += child_rows;
        }
        break;
      }
      case Op::kRows:
        ensure_grad(n.a).middleRows(n.i0, n.i1) += g;
        break;
      case Op::kTranspose:
        ensure_grad(n.a) += g.transpose();
        break;
      case Op::kColScale: {
        const Matrix& a = nodes_[n.a].value;
        const Matrix& v = nodes_[n.b].value;
        ensure_grad(n.a) += g * v.col(0).asDiagonal();
        Matrix& gv = ensure_grad(n.b);
        gv.col(0) += g.cwiseProduct(a).colwise().sum().transpose();
        break;
      }
      case Op::kBroadcastCols:
        ensure_grad(n.a).col(0) += g.rowwise().sum();
        break;
      case Op::kColLogSumExp: {
        const Matrix& a = nodes_[n.a].value;
        Matrix& ga = ensure_grad(n.a);
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
          ga.col(j).array() +=
              (a.col(j).array() - n.value(0, j)).exp() * g(0, j);
        }
        break;
      }
      case Op::kLogSumExp: {
        const Matrix& a = nodes_[n.a].value;
        ensure_grad(n.a).array() +=
            (a.array() - n.value(0, 0)).exp() * g(0, 0);
        break;
      }
      case Op::kPick:
        ensure_grad(n.a)(n.i0, n.i1) += g(0, 0);
        break;
      case Op::kSum:
        ensure_grad(n.a).array() += g(0, 0);
        break;
    }
  }

  // Flush parameter-leaf gradients into the bound stores.
  for (std::int32_t id : param_nodes_) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const ParamBinding& binding =
        bindings_[static_cast<std::size_t>(n.i0)];
    ParamStore::Entry& e = binding.store->entry(binding.name);
    if (e.value.rows() != n.value.rows() || e.value.cols() != n.value.cols()) {
      throw StructureError("tape: parameter '" + binding.name +
                           "' changed shape between forward and backward");
    }
    if (e.frozen) {
      e.grad.setZero();
    } else if (n.grad.size() != 0) {
      e.grad += n.grad;
    }
  }
}

void Tape::clear() {
  nodes_.clear();
  bindings_.clear();
  param_nodes_.clear();
  concat_children_.clear();
  param_cache_.clear();
}

ForwardResult forward_scalar(Tape& tape,
                             const std::function<Var(Tape&)>& graph) {
  Var root = graph(tape);
  ForwardResult out;
  out.root = root;
  out.value = tape.scalar_value(root);
  return out;
}

}  // namespace metalstm
