// Copyright 2026 The tabxfer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tabxfer/numcore/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <type_traits>

#include "tabxfer/numcore/kernels.hpp"
#include "tabxfer/numcore/random.hpp"

namespace tabxfer {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  if (shape.empty()) os << "()";
  return os.str();
}

Segments Segments::from_lengths(std::span<const std::size_t> lengths) {
  Segments s;
  s.offsets.reserve(lengths.size() + 1);
  for (std::size_t len : lengths) s.offsets.push_back(s.offsets.back() + len);
  return s;
}

Segments Segments::uniform(std::size_t count, std::size_t length) {
  Segments s;
  s.offsets.reserve(count + 1);
  for (std::size_t i = 0; i < count; ++i) s.offsets.push_back(s.offsets.back() + length);
  return s;
}

namespace {

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb,
          T* c, std::size_t ldc, bool accumulate) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().gemm(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      T* crow = c + i * ldc;
      if (!accumulate) std::fill(crow, crow + n, T(0));
      for (std::size_t p = 0; p < k; ++p) {
        const T av = a[i * lda + p];
        const T* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
      }
    }
  }
}

template <typename T>
std::vector<T> transposed(const T* a, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = a[i * cols + j];
  }
  return out;
}

template <typename T>
void accumulate(Tensor<T>& dst, const T* src) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().add(dst.size(), dst.data.data(), src, dst.data.data());
  } else {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src[i];
  }
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  return std::all_of(t.data.begin(), t.data.end(), [](T x) { return std::isfinite(x); });
}

template <typename T>
constexpr T norm_floor() {
  return T(1e-12);
}

}  // namespace

template <typename T>
auto Graph<T>::node(Var v) const -> const Node& {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::out_of_range("invalid graph variable " + std::to_string(v.id));
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
auto Graph<T>::node(Var v) -> Node& {
  return const_cast<Node&>(static_cast<const Graph&>(*this).node(v));
}

template <typename T>
const Tensor<T>& Graph<T>::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) throw std::logic_error("no gradient recorded for node " + std::to_string(v.id));
  return n.grad;
}

template <typename T>
Var Graph<T>::named(std::string_view name) const {
  auto it = names_.find(name);
  if (it == names_.end()) throw std::out_of_range("no graph output named '" + std::string(name) + "'");
  return Var{it->second};
}

template <typename T>
Tensor<T>& Graph<T>::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape, T(0));
  return n.grad;
}

template <typename T>
void Graph<T>::shape_error(std::string_view op, const std::string& detail) const {
  throw ShapeError(std::string(op) + ": " + detail);
}

template <typename T>
void Graph<T>::check_rank2(std::string_view op, Var v) const {
  if (node(v).value.rank() != 2) {
    shape_error(op, "expected a matrix, got shape " + shape_string(node(v).value.shape));
  }
}

template <typename T>
Var Graph<T>::push(std::string_view op, std::vector<int> inputs, Tensor<T> value, BackwardFn backward) {
  const int id = static_cast<int>(nodes_.size());
  if (options_.check_finite && !all_finite(value)) {
    throw NumericError("non-finite value produced by " + std::string(op) + " (node " + std::to_string(id) + ")",
                       id);
  }
  Node n;
  n.op = op;
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [&](int i) { return needs_grad(i); });
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{id};
}

template <typename T>
Var Graph<T>::input(Tensor<T> value) {
  return push("input", {}, std::move(value), nullptr);
}

template <typename T>
Var Graph<T>::variable(Tensor<T> value) {
  Var v = push("variable", {}, std::move(value), nullptr);
  nodes_.back().requires_grad = true;
  return v;
}

template <typename T>
Var Graph<T>::param(Parameter<T>& p) {
  if (auto it = bound_params_.find(&p); it != bound_params_.end()) return Var{it->second};
  Var v = push("param", {}, p.value, nullptr);
  nodes_.back().requires_grad = p.trainable;
  nodes_.back().param = &p;
  bound_params_.emplace(&p, v.id);
  return v;
}

template <typename T>
void Graph<T>::backward(Var loss) {
  const Node& l = node(loss);
  if (l.value.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_string(l.value.shape));
  }
  if (backward_done_) throw std::logic_error("backward: graph already differentiated");
  backward_done_ = true;
  if (l.requires_grad) {
    grad_buffer(loss.id).data[0] = T(1);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, id);
    }
  }
  for (Node& n : nodes_) {
    if (n.requires_grad && n.param == nullptr && n.inputs.empty() && n.grad.empty()) {
      n.grad = Tensor<T>(n.value.shape, T(0));
    }
  }
  for (auto& [p, id] : bound_params_) {
    auto* param = const_cast<Parameter<T>*>(p);
    if (!param->trainable) continue;
    if (param->grad.shape != param->value.shape) param->zero_grad();
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad.empty()) accumulate(param->grad, n.grad.data.data());
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Var Graph<T>::matmul(Var a, Var b) {
  check_rank2("matmul", a);
  check_rank2("matmul", b);
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (av.cols() != bv.rows()) {
    shape_error("matmul", "inner dimensions differ (" + shape_string(av.shape) + " vs " + shape_string(bv.shape) + ")");
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor<T> out = Tensor<T>::matrix(m, n);
  gemm(m, n, k, av.data.data(), k, bv.data.data(), n, out.data.data(), n, false);
  return push("matmul", {a.id, b.id}, std::move(out), [m, k, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    const int ia = nd.inputs[0], ib = nd.inputs[1];
    const T* gy = nd.grad.data.data();
    if (g.needs_grad(ia)) {
      const auto bt = transposed(g.nodes_[ib].value.data.data(), k, n);
      gemm(m, k, n, gy, n, bt.data(), k, g.grad_buffer(ia).data.data(), k, true);
    }
    if (g.needs_grad(ib)) {
      const auto at = transposed(g.nodes_[ia].value.data.data(), m, k);
      gemm(k, n, m, at.data(), m, gy, n, g.grad_buffer(ib).data.data(), n, true);
    }
  });
}

template <typename T>
Var Graph<T>::matmul_nt(Var a, Var b) {
  check_rank2("matmul_nt", a);
  check_rank2("matmul_nt", b);
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (av.cols() != bv.cols()) {
    shape_error("matmul_nt",
                "column counts differ (" + shape_string(av.shape) + " vs " + shape_string(bv.shape) + ")");
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor<T> out = Tensor<T>::matrix(m, n);
  const auto bt = transposed(bv.data.data(), n, k);
  gemm(m, n, k, av.data.data(), k, bt.data(), n, out.data.data(), n, false);
  return push("matmul_nt", {a.id, b.id}, std::move(out), [m, k, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    const int ia = nd.inputs[0], ib = nd.inputs[1];
    const T* gy = nd.grad.data.data();
    if (g.needs_grad(ia)) {
      gemm(m, k, n, gy, n, g.nodes_[ib].value.data.data(), k, g.grad_buffer(ia).data.data(), k, true);
    }
    if (g.needs_grad(ib)) {
      const auto gyt = transposed(gy, m, n);
      gemm(n, k, m, gyt.data(), m, g.nodes_[ia].value.data.data(), k, g.grad_buffer(ib).data.data(), k, true);
    }
  });
}

template <typename T>
Var Graph<T>::transpose(Var a) {
  check_rank2("transpose", a);
  const Tensor<T>& av = value(a);
  const std::size_t m = av.rows(), n = av.cols();
  Tensor<T> out(Shape{n, m}, transposed(av.data.data(), m, n));
  return push("transpose", {a.id}, std::move(out), [m, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    const auto back = transposed(nd.grad.data.data(), n, m);
    accumulate(g.grad_buffer(nd.inputs[0]), back.data());
  });
}

// ---------------------------------------------------------------------------
// Elementwise and broadcast

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (av.shape != bv.shape) shape_error("add", "shapes differ (" + shape_string(av.shape) + " vs " + shape_string(bv.shape) + ")");
  Tensor<T> out(av.shape);
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().add(out.size(), av.data.data(), bv.data.data(), out.data.data());
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] + bv.data[i];
  }
  return push("add", {a.id, b.id}, std::move(out), [](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    for (int in : nd.inputs) {
      if (g.needs_grad(in)) accumulate(g.grad_buffer(in), nd.grad.data.data());
    }
  });
}

template <typename T>
Var Graph<T>::sub(Var a, Var b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (av.shape != bv.shape) shape_error("sub", "shapes differ (" + shape_string(av.shape) + " vs " + shape_string(bv.shape) + ")");
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] - bv.data[i];
  return push("sub", {a.id, b.id}, std::move(out), [](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    if (g.needs_grad(nd.inputs[0])) accumulate(g.grad_buffer(nd.inputs[0]), nd.grad.data.data());
    if (g.needs_grad(nd.inputs[1])) {
      Tensor<T>& gb = g.grad_buffer(nd.inputs[1]);
      for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] -= nd.grad.data[i];
    }
  });
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (av.shape != bv.shape) shape_error("mul", "shapes differ (" + shape_string(av.shape) + " vs " + shape_string(bv.shape) + ")");
  Tensor<T> out(av.shape);
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().mul(out.size(), av.data.data(), bv.data.data(), out.data.data());
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] * bv.data[i];
  }
  return push("mul", {a.id, b.id}, std::move(out), [](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    const int ia = nd.inputs[0], ib = nd.inputs[1];
    const std::size_t n = nd.grad.size();
    std::vector<T> tmp(n);
    if (g.needs_grad(ia)) {
      for (std::size_t i = 0; i < n; ++i) tmp[i] = nd.grad.data[i] * g.nodes_[ib].value.data[i];
      accumulate(g.grad_buffer(ia), tmp.data());
    }
    if (g.needs_grad(ib)) {
      for (std::size_t i = 0; i < n; ++i) tmp[i] = nd.grad.data[i] * g.nodes_[ia].value.data[i];
      accumulate(g.grad_buffer(ib), tmp.data());
    }
  });
}

template <typename T>
Var Graph<T>::add_row(Var a, Var row) {
  check_rank2("add_row", a);
  const Tensor<T>& av = value(a);
  const Tensor<T>& rv = value(row);
  if (rv.size() != av.cols()) {
    shape_error("add_row", "row of shape " + shape_string(rv.shape) + " cannot broadcast over " + shape_string(av.shape));
  }
  const std::size_t m = av.rows(), n = av.cols();
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = av.data[i * n + j] + rv.data[j];
  }
  return push("add_row", {a.id, row.id}, std::move(out), [m, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    if (g.needs_grad(nd.inputs[0])) accumulate(g.grad_buffer(nd.inputs[0]), nd.grad.data.data());
    if (g.needs_grad(nd.inputs[1])) {
      Tensor<T>& gr = g.grad_buffer(nd.inputs[1]);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gr.data[j] += nd.grad.data[i * n + j];
      }
    }
  });
}

template <typename T>
Var Graph<T>::mul_row(Var a, Var row) {
  check_rank2("mul_row", a);
  const Tensor<T>& av = value(a);
  const Tensor<T>& rv = value(row);
  if (rv.size() != av.cols()) {
    shape_error("mul_row", "row of shape " + shape_string(rv.shape) + " cannot broadcast over " + shape_string(av.shape));
  }
  const std::size_t m = av.rows(), n = av.cols();
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = av.data[i * n + j] * rv.data[j];
  }
  return push("mul_row", {a.id, row.id}, std::move(out), [m, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    const int ia = nd.inputs[0], ir = nd.inputs[1];
    const Tensor<T>& av = g.nodes_[ia].value;
    const Tensor<T>& rv = g.nodes_[ir].value;
    if (g.needs_grad(ia)) {
      Tensor<T>& ga = g.grad_buffer(ia);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) ga.data[i * n + j] += nd.grad.data[i * n + j] * rv.data[j];
      }
    }
    if (g.needs_grad(ir)) {
      Tensor<T>& gr = g.grad_buffer(ir);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gr.data[j] += nd.grad.data[i * n + j] * av.data[i * n + j];
      }
    }
  });
}

template <typename T>
Var Graph<T>::scale_rows(Var a, Var column) {
  check_rank2("scale_rows", a);
  const Tensor<T>& av = value(a);
  const Tensor<T>& sv = value(column);
  if (sv.size() != av.rows()) {
    shape_error("scale_rows", "column of shape " + shape_string(sv.shape) + " does not match rows of " + shape_string(av.shape));
  }
  const std::size_t m = av.rows(), n = av.cols();
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = av.data[i * n + j] * sv.data[i];
  }
  return push("scale_rows", {a.id, column.id}, std::move(out), [m, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    const int ia = nd.inputs[0], is = nd.inputs[1];
    const Tensor<T>& av = g.nodes_[ia].value;
    const Tensor<T>& sv = g.nodes_[is].value;
    if (g.needs_grad(ia)) {
      Tensor<T>& ga = g.grad_buffer(ia);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) ga.data[i * n + j] += nd.grad.data[i * n + j] * sv.data[i];
      }
    }
    if (g.needs_grad(is)) {
      Tensor<T>& gs = g.grad_buffer(is);
      for (std::size_t i = 0; i < m; ++i) {
        T acc = T(0);
        for (std::size_t j = 0; j < n; ++j) acc += nd.grad.data[i * n + j] * av.data[i * n + j];
        gs.data[i] += acc;
      }
    }
  });
}

template <typename T>
Var Graph<T>::scale(Var a, T factor) {
  const Tensor<T>& av = value(a);
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] * factor;
  return push("scale", {a.id}, std::move(out), [factor](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += nd.grad.data[i] * factor;
  });
}

template <typename T>
Var Graph<T>::add_scalar(Var a, T offset) {
  const Tensor<T>& av = value(a);
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] + offset;
  return push("add_scalar", {a.id}, std::move(out), [](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    accumulate(g.grad_buffer(nd.inputs[0]), nd.grad.data.data());
  });
}

template <typename T>
Var Graph<T>::relu(Var a) {
  const Tensor<T>& av = value(a);
  Tensor<T> out(av.shape);
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().relu(out.size(), av.data.data(), out.data.data());
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] > T(0) ? av.data[i] : T(0);
  }
  return push("relu", {a.id}, std::move(out), [](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    const Tensor<T>& x = g.nodes_[nd.inputs[0]].value;
    Tensor<T>& gx = g.grad_buffer(nd.inputs[0]);
    if constexpr (std::is_same_v<T, float>) {
      kernels::active().relu_backward(x.size(), x.data.data(), nd.grad.data.data(), gx.data.data());
    } else {
      for (std::size_t i = 0; i < x.size(); ++i) gx.data[i] += x.data[i] > T(0) ? nd.grad.data[i] : T(0);
    }
  });
}

template <typename T>
Var Graph<T>::exp(Var a) {
  const Tensor<T>& av = value(a);
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::exp(av.data[i]);
  return push("exp", {a.id}, std::move(out), [](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += nd.grad.data[i] * nd.value.data[i];
  });
}

template <typename T>
Var Graph<T>::log(Var a) {
  const Tensor<T>& av = value(a);
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::log(av.data[i]);
  return push("log", {a.id}, std::move(out), [](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    const Tensor<T>& x = g.nodes_[nd.inputs[0]].value;
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += nd.grad.data[i] / x.data[i];
  });
}

template <typename T>
Var Graph<T>::squared_error(Var a, Var b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (av.shape != bv.shape) {
    shape_error("squared_error", "shapes differ (" + shape_string(av.shape) + " vs " + shape_string(bv.shape) + ")");
  }
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T d = av.data[i] - bv.data[i];
    out.data[i] = d * d;
  }
  return push("squared_error", {a.id, b.id}, std::move(out), [](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    const int ia = nd.inputs[0], ib = nd.inputs[1];
    const Tensor<T>& av = g.nodes_[ia].value;
    const Tensor<T>& bv = g.nodes_[ib].value;
    for (int side = 0; side < 2; ++side) {
      const int in = side == 0 ? ia : ib;
      if (!g.needs_grad(in)) continue;
      const T sign = side == 0 ? T(2) : T(-2);
      Tensor<T>& gx = g.grad_buffer(in);
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += sign * (av.data[i] - bv.data[i]) * nd.grad.data[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Row-wise normalizations

template <typename T>
Var Graph<T>::softmax(Var a) {
  check_rank2("softmax", a);
  const Tensor<T>& av = value(a);
  const std::size_t m = av.rows(), n = av.cols();
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < m; ++i) {
    const T* x = av.data.data() + i * n;
    T* y = out.data.data() + i * n;
    const T mx = *std::max_element(x, x + n);
    T total = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      total += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= total;
  }
  return push("softmax", {a.id}, std::move(out), [m, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t i = 0; i < m; ++i) {
      const T* y = nd.value.data.data() + i * n;
      const T* gy = nd.grad.data.data() + i * n;
      T dot = T(0);
      for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) ga.data[i * n + j] += y[j] * (gy[j] - dot);
    }
  });
}

template <typename T>
Var Graph<T>::log_softmax(Var a) {
  check_rank2("log_softmax", a);
  const Tensor<T>& av = value(a);
  const std::size_t m = av.rows(), n = av.cols();
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < m; ++i) {
    const T* x = av.data.data() + i * n;
    T* y = out.data.data() + i * n;
    const T mx = *std::max_element(x, x + n);
    T total = T(0);
    for (std::size_t j = 0; j < n; ++j) total += std::exp(x[j] - mx);
    const T lse = mx + std::log(total);
    for (std::size_t j = 0; j < n; ++j) y[j] = x[j] - lse;
  }
  return push("log_softmax", {a.id}, std::move(out), [m, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t i = 0; i < m; ++i) {
      const T* y = nd.value.data.data() + i * n;
      const T* gy = nd.grad.data.data() + i * n;
      T total = T(0);
      for (std::size_t j = 0; j < n; ++j) total += gy[j];
      for (std::size_t j = 0; j < n; ++j) ga.data[i * n + j] += gy[j] - std::exp(y[j]) * total;
    }
  });
}

template <typename T>
Var Graph<T>::layer_norm(Var a, T eps) {
  check_rank2("layer_norm", a);
  const Tensor<T>& av = value(a);
  const std::size_t m = av.rows(), n = av.cols();
  Tensor<T> out(av.shape);
  auto inv_std = std::make_shared<std::vector<T>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const T* x = av.data.data() + i * n;
    T mu = T(0);
    for (std::size_t j = 0; j < n; ++j) mu += x[j];
    mu /= static_cast<T>(n);
    T var = T(0);
    for (std::size_t j = 0; j < n; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<T>(n);
    const T inv = T(1) / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = (x[j] - mu) * inv;
  }
  return push("layer_norm", {a.id}, std::move(out), [m, n, inv_std](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t i = 0; i < m; ++i) {
      const T* y = nd.value.data.data() + i * n;
      const T* gy = nd.grad.data.data() + i * n;
      T mean_g = T(0), mean_gy = T(0);
      for (std::size_t j = 0; j < n; ++j) {
        mean_g += gy[j];
        mean_gy += gy[j] * y[j];
      }
      mean_g /= static_cast<T>(n);
      mean_gy /= static_cast<T>(n);
      const T inv = (*inv_std)[i];
      for (std::size_t j = 0; j < n; ++j) ga.data[i * n + j] += inv * (gy[j] - mean_g - y[j] * mean_gy);
    }
  });
}

template <typename T>
Var Graph<T>::l2_normalize_rows(Var a) {
  check_rank2("l2_normalize_rows", a);
  const Tensor<T>& av = value(a);
  const std::size_t m = av.rows(), n = av.cols();
  Tensor<T> out(av.shape);
  auto norms = std::make_shared<std::vector<T>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    T ss = T(0);
    for (std::size_t j = 0; j < n; ++j) ss += av.data[i * n + j] * av.data[i * n + j];
    const T nrm = std::sqrt(ss);
    (*norms)[i] = nrm;
    const T denom = std::max(nrm, norm_floor<T>());
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = av.data[i * n + j] / denom;
  }
  return push("l2_normalize_rows", {a.id}, std::move(out), [m, n, norms](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t i = 0; i < m; ++i) {
      const T* y = nd.value.data.data() + i * n;
      const T* gy = nd.grad.data.data() + i * n;
      const T nrm = (*norms)[i];
      if (nrm <= norm_floor<T>()) {
        for (std::size_t j = 0; j < n; ++j) ga.data[i * n + j] += gy[j] / norm_floor<T>();
        continue;
      }
      T dot = T(0);
      for (std::size_t j = 0; j < n; ++j) dot += y[j] * gy[j];
      for (std::size_t j = 0; j < n; ++j) ga.data[i * n + j] += (gy[j] - y[j] * dot) / nrm;
    }
  });
}

template <typename T>
Var Graph<T>::cosine_rows(Var a, Var b) {
  check_rank2("cosine_rows", a);
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (av.shape != bv.shape) {
    shape_error("cosine_rows", "shapes differ (" + shape_string(av.shape) + " vs " + shape_string(bv.shape) + ")");
  }
  const std::size_t m = av.rows(), n = av.cols();
  Tensor<T> out = Tensor<T>::matrix(m, 1);
  // Per row: dot, |a|, |b|.
  auto stats = std::make_shared<std::vector<T>>(3 * m);
  for (std::size_t i = 0; i < m; ++i) {
    T dot = T(0), aa = T(0), bb = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      const T x = av.data[i * n + j], y = bv.data[i * n + j];
      dot += x * y;
      aa += x * x;
      bb += y * y;
    }
    const T na = std::max(std::sqrt(aa), norm_floor<T>());
    const T nb = std::max(std::sqrt(bb), norm_floor<T>());
    (*stats)[3 * i] = dot;
    (*stats)[3 * i + 1] = na;
    (*stats)[3 * i + 2] = nb;
    out.data[i] = dot / (na * nb);
  }
  return push("cosine_rows", {a.id, b.id}, std::move(out), [m, n, stats](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    const int ia = nd.inputs[0], ib = nd.inputs[1];
    const Tensor<T>& av = g.nodes_[ia].value;
    const Tensor<T>& bv = g.nodes_[ib].value;
    for (std::size_t i = 0; i < m; ++i) {
      const T na = (*stats)[3 * i + 1], nb = (*stats)[3 * i + 2];
      const T cos = nd.value.data[i];
      const T gy = nd.grad.data[i];
      const bool a_floor = na <= norm_floor<T>(), b_floor = nb <= norm_floor<T>();
      if (g.needs_grad(ia)) {
        Tensor<T>& ga = g.grad_buffer(ia);
        for (std::size_t j = 0; j < n; ++j) {
          T d = bv.data[i * n + j] / (na * nb);
          if (!a_floor) d -= cos * av.data[i * n + j] / (na * na);
          ga.data[i * n + j] += gy * d;
        }
      }
      if (g.needs_grad(ib)) {
        Tensor<T>& gb = g.grad_buffer(ib);
        for (std::size_t j = 0; j < n; ++j) {
          T d = av.data[i * n + j] / (na * nb);
          if (!b_floor) d -= cos * bv.data[i * n + j] / (nb * nb);
          gb.data[i * n + j] += gy * d;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Var Graph<T>::mean(Var a, int axis) {
  check_rank2("mean", a);
  if (axis != 0 && axis != 1) shape_error("mean", "axis must be 0 or 1");
  const Tensor<T>& av = value(a);
  const std::size_t m = av.rows(), n = av.cols();
  Tensor<T> out = axis == 0 ? Tensor<T>::matrix(1, n) : Tensor<T>::matrix(m, 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data[axis == 0 ? j : i] += av.data[i * n + j];
  }
  const T count = static_cast<T>(axis == 0 ? m : n);
  for (T& v : out.data) v /= count;
  return push("mean", {a.id}, std::move(out), [m, n, axis, count](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) ga.data[i * n + j] += nd.grad.data[axis == 0 ? j : i] / count;
    }
  });
}

template <typename T>
Var Graph<T>::sum(Var a) {
  const Tensor<T>& av = value(a);
  T total = T(0);
  for (T v : av.data) total += v;
  return push("sum", {a.id}, Tensor<T>::scalar(total), [](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    const T gy = nd.grad.data[0];
    for (T& v : ga.data) v += gy;
  });
}

template <typename T>
Var Graph<T>::dropout(Var a, T rate) {
  if (!(rate >= T(0) && rate < T(1))) shape_error("dropout", "rate must lie in [0, 1)");
  if (!options_.training || rate == T(0)) return a;
  const Tensor<T>& av = value(a);
  const int id = static_cast<int>(nodes_.size());
  Rng rng(derive_seed({options_.seed, static_cast<std::uint64_t>(id), 0xd50u}));
  auto mask = std::make_shared<std::vector<T>>(av.size());
  const T keep_scale = T(1) / (T(1) - rate);
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < av.size(); ++i) {
    (*mask)[i] = rng.uniform() < static_cast<double>(rate) ? T(0) : keep_scale;
    out.data[i] = av.data[i] * (*mask)[i];
  }
  return push("dropout", {a.id}, std::move(out), [mask](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += nd.grad.data[i] * (*mask)[i];
  });
}

// ---------------------------------------------------------------------------
// Structural

template <typename T>
Var Graph<T>::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) shape_error("concat_rows", "no inputs");
  const std::size_t n = value(parts[0]).cols();
  std::size_t m = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    check_rank2("concat_rows", p);
    if (value(p).cols() != n) shape_error("concat_rows", "column counts differ");
    m += value(p).rows();
    ids.push_back(p.id);
  }
  Tensor<T> out = Tensor<T>::matrix(m, n);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor<T>& pv = value(p);
    std::copy(pv.data.begin(), pv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += pv.size();
  }
  return push("concat_rows", std::move(ids), std::move(out), [](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    std::size_t off = 0;
    for (int in : nd.inputs) {
      const std::size_t len = g.nodes_[in].value.size();
      if (g.needs_grad(in)) accumulate(g.grad_buffer(in), nd.grad.data.data() + off);
      off += len;
    }
  });
}

template <typename T>
Var Graph<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) shape_error("concat_cols", "no inputs");
  const std::size_t m = value(parts[0]).rows();
  std::size_t n = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    check_rank2("concat_cols", p);
    if (value(p).rows() != m) shape_error("concat_cols", "row counts differ");
    n += value(p).cols();
    ids.push_back(p.id);
  }
  Tensor<T> out = Tensor<T>::matrix(m, n);
  std::size_t col = 0;
  for (Var p : parts) {
    const Tensor<T>& pv = value(p);
    const std::size_t w = pv.cols();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(pv.data.begin() + static_cast<std::ptrdiff_t>(i * w), w,
                  out.data.begin() + static_cast<std::ptrdiff_t>(i * n + col));
    }
    col += w;
  }
  return push("concat_cols", std::move(ids), std::move(out), [m, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    std::size_t col = 0;
    for (int in : nd.inputs) {
      const std::size_t w = g.nodes_[in].value.cols();
      if (g.needs_grad(in)) {
        Tensor<T>& gi = g.grad_buffer(in);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < w; ++j) gi.data[i * w + j] += nd.grad.data[i * n + col + j];
        }
      }
      col += w;
    }
  });
}

template <typename T>
Var Graph<T>::gather_rows(Var a, std::span<const std::size_t> index) {
  check_rank2("gather_rows", a);
  const Tensor<T>& av = value(a);
  if (index.empty()) shape_error("gather_rows", "empty index");
  const std::size_t n = av.cols();
  for (std::size_t r : index) {
    if (r >= av.rows()) shape_error("gather_rows", "row index " + std::to_string(r) + " out of range for " + shape_string(av.shape));
  }
  Tensor<T> out = Tensor<T>::matrix(index.size(), n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    std::copy_n(av.data.begin() + static_cast<std::ptrdiff_t>(index[i] * n), n,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(index.begin(), index.end());
  return push("gather_rows", {a.id}, std::move(out), [idx, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      T* dst = ga.data.data() + (*idx)[i] * n;
      const T* src = nd.grad.data.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
    }
  });
}

// ---------------------------------------------------------------------------
// Segment operations

namespace {

void check_segments(std::string_view op, const Segments& seg, std::size_t rows) {
  if (seg.total() != rows) {
    throw ShapeError(std::string(op) + ": segments cover " + std::to_string(seg.total()) + " rows, input has " +
                     std::to_string(rows));
  }
  for (std::size_t s = 0; s < seg.count(); ++s) {
    if (seg.length(s) == 0) throw ShapeError(std::string(op) + ": empty segment " + std::to_string(s));
  }
}

}  // namespace

template <typename T>
Var Graph<T>::segment_sum(Var a, const Segments& seg) {
  check_rank2("segment_sum", a);
  const Tensor<T>& av = value(a);
  check_segments("segment_sum", seg, av.rows());
  const std::size_t n = av.cols();
  Tensor<T> out = Tensor<T>::matrix(seg.count(), n);
  for (std::size_t s = 0; s < seg.count(); ++s) {
    for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) {
      for (std::size_t j = 0; j < n; ++j) out.data[s * n + j] += av.data[r * n + j];
    }
  }
  return push("segment_sum", {a.id}, std::move(out), [seg, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t s = 0; s < seg.count(); ++s) {
      for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) {
        for (std::size_t j = 0; j < n; ++j) ga.data[r * n + j] += nd.grad.data[s * n + j];
      }
    }
  });
}

template <typename T>
Var Graph<T>::segment_mean(Var a, const Segments& seg) {
  check_rank2("segment_mean", a);
  const Tensor<T>& av = value(a);
  check_segments("segment_mean", seg, av.rows());
  const std::size_t n = av.cols();
  Tensor<T> out = Tensor<T>::matrix(seg.count(), n);
  for (std::size_t s = 0; s < seg.count(); ++s) {
    for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) {
      for (std::size_t j = 0; j < n; ++j) out.data[s * n + j] += av.data[r * n + j];
    }
    const T len = static_cast<T>(seg.length(s));
    for (std::size_t j = 0; j < n; ++j) out.data[s * n + j] /= len;
  }
  return push("segment_mean", {a.id}, std::move(out), [seg, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t s = 0; s < seg.count(); ++s) {
      const T len = static_cast<T>(seg.length(s));
      for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) {
        for (std::size_t j = 0; j < n; ++j) ga.data[r * n + j] += nd.grad.data[s * n + j] / len;
      }
    }
  });
}

template <typename T>
Var Graph<T>::segment_max(Var a, const Segments& seg) {
  check_rank2("segment_max", a);
  const Tensor<T>& av = value(a);
  check_segments("segment_max", seg, av.rows());
  const std::size_t n = av.cols();
  Tensor<T> out = Tensor<T>::matrix(seg.count(), n);
  auto argmax = std::make_shared<std::vector<std::size_t>>(seg.count() * n);
  for (std::size_t s = 0; s < seg.count(); ++s) {
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t best = seg.begin(s);
      for (std::size_t r = seg.begin(s) + 1; r < seg.end(s); ++r) {
        if (av.data[r * n + j] > av.data[best * n + j]) best = r;
      }
      (*argmax)[s * n + j] = best;
      out.data[s * n + j] = av.data[best * n + j];
    }
  }
  return push("segment_max", {a.id}, std::move(out), [argmax, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t i = 0; i < argmax->size(); ++i) {
      ga.data[(*argmax)[i] * n + i % n] += nd.grad.data[i];
    }
  });
}

template <typename T>
Var Graph<T>::segment_softmax(Var a, const Segments& seg) {
  check_rank2("segment_softmax", a);
  const Tensor<T>& av = value(a);
  check_segments("segment_softmax", seg, av.rows());
  const std::size_t n = av.cols();
  Tensor<T> out(av.shape);
  for (std::size_t s = 0; s < seg.count(); ++s) {
    for (std::size_t j = 0; j < n; ++j) {
      T mx = av.data[seg.begin(s) * n + j];
      for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) mx = std::max(mx, av.data[r * n + j]);
      T total = T(0);
      for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) {
        out.data[r * n + j] = std::exp(av.data[r * n + j] - mx);
        total += out.data[r * n + j];
      }
      for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) out.data[r * n + j] /= total;
    }
  }
  return push("segment_softmax", {a.id}, std::move(out), [seg, n](Graph& g, int self) {
    const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& ga = g.grad_buffer(nd.inputs[0]);
    for (std::size_t s = 0; s < seg.count(); ++s) {
      for (std::size_t j = 0; j < n; ++j) {
        T dot = T(0);
        for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) dot += nd.grad.data[r * n + j] * nd.value.data[r * n + j];
        for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) {
          ga.data[r * n + j] += nd.value.data[r * n + j] * (nd.grad.data[r * n + j] - dot);
        }
      }
    }
  });
}

template <typename T>
Var Graph<T>::segment_attention(Var q, Var k, Var v, const Segments& seg, std::size_t heads, T scale,
                                T dropout_rate) {
  constexpr std::string_view op = "segment_attention";
  check_rank2(op, q);
  const Tensor<T>& qv = value(q);
  const Tensor<T>& kv = value(k);
  const Tensor<T>& vv = value(v);
  if (kv.shape != qv.shape || vv.shape != qv.shape) {
    shape_error(op, "q/k/v shapes differ (" + shape_string(qv.shape) + ", " + shape_string(kv.shape) + ", " +
                        shape_string(vv.shape) + ")");
  }
  check_segments(op, seg, qv.rows());
  const std::size_t width = qv.cols();
  if (heads == 0 || width % heads != 0) shape_error(op, "width " + std::to_string(width) + " not divisible by heads");
  if (!(dropout_rate >= T(0) && dropout_rate < T(1))) shape_error(op, "dropout rate must lie in [0, 1)");
  const std::size_t dh = width / heads;
  const bool drop = options_.training && dropout_rate > T(0);

  // Per segment, per head: n x n probabilities, then (optionally) the
  // dropout multipliers, stored contiguously.
  std::vector<std::size_t> prob_offset(seg.count() + 1, 0);
  for (std::size_t s = 0; s < seg.count(); ++s) prob_offset[s + 1] = prob_offset[s] + heads * seg.length(s) * seg.length(s);
  auto probs = std::make_shared<std::vector<T>>(prob_offset.back());
  auto keep = std::make_shared<std::vector<T>>(drop ? prob_offset.back() : 0);
  Rng rng(derive_seed({options_.seed, nodes_.size(), 0xa77u}));
  const T keep_scale = drop ? T(1) / (T(1) - dropout_rate) : T(1);

  Tensor<T> out(qv.shape);
  for (std::size_t s = 0; s < seg.count(); ++s) {
    const std::size_t base = seg.begin(s), n = seg.length(s);
    for (std::size_t h = 0; h < heads; ++h) {
      T* p = probs->data() + prob_offset[s] + h * n * n;
      const std::size_t c0 = h * dh;
      for (std::size_t i = 0; i < n; ++i) {
        const T* qi = qv.data.data() + (base + i) * width + c0;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
          const T* kj = kv.data.data() + (base + j) * width + c0;
          T dot = T(0);
          for (std::size_t c = 0; c < dh; ++c) dot += qi[c] * kj[c];
          p[i * n + j] = dot * scale;
          mx = std::max(mx, p[i * n + j]);
        }
        T total = T(0);
        for (std::size_t j = 0; j < n; ++j) {
          p[i * n + j] = std::exp(p[i * n + j] - mx);
          total += p[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) p[i * n + j] /= total;
        T* o = out.data.data() + (base + i) * width + c0;
        for (std::size_t j = 0; j < n; ++j) {
          T w = p[i * n + j];
          if (drop) {
            const T mult = rng.uniform() < static_cast<double>(dropout_rate) ? T(0) : keep_scale;
            (*keep)[prob_offset[s] + h * n * n + i * n + j] = mult;
            w *= mult;
          }
          const T* vj = vv.data.data() + (base + j) * width + c0;
          for (std::size_t c = 0; c < dh; ++c) o[c] += w * vj[c];
        }
      }
    }
  }

  return push(op, {q.id, k.id, v.id}, std::move(out),
              [seg, heads, dh, width, scale, drop, probs, keep, prob_offset](Graph& g, int self) {
                const Node& nd = g.nodes_[static_cast<std::size_t>(self)];
                const int iq = nd.inputs[0], ik = nd.inputs[1], iv = nd.inputs[2];
                const Tensor<T>& qv = g.nodes_[iq].value;
                const Tensor<T>& kv = g.nodes_[ik].value;
                const Tensor<T>& vv = g.nodes_[iv].value;
                T* gq = g.needs_grad(iq) ? g.grad_buffer(iq).data.data() : nullptr;
                T* gk = g.needs_grad(ik) ? g.grad_buffer(ik).data.data() : nullptr;
                T* gv = g.needs_grad(iv) ? g.grad_buffer(iv).data.data() : nullptr;
                const T* gy = nd.grad.data.data();
                std::vector<T> dp, ds;
                for (std::size_t s = 0; s < seg.count(); ++s) {
                  const std::size_t base = seg.begin(s), n = seg.length(s);
                  dp.assign(n * n, T(0));
                  ds.assign(n * n, T(0));
                  for (std::size_t h = 0; h < heads; ++h) {
                    const std::size_t off = prob_offset[s] + h * n * n;
                    const T* p = probs->data() + off;
                    const T* mult = drop ? keep->data() + off : nullptr;
                    const std::size_t c0 = h * dh;
                    for (std::size_t i = 0; i < n; ++i) {
                      const T* go = gy + (base + i) * width + c0;
                      for (std::size_t j = 0; j < n; ++j) {
                        const T* vj = vv.data.data() + (base + j) * width + c0;
                        T acc = T(0);
                        for (std::size_t c = 0; c < dh; ++c) acc += go[c] * vj[c];
                        const T m = drop ? mult[i * n + j] : T(1);
                        dp[i * n + j] = acc * m;
                        if (gv != nullptr) {
                          const T w = p[i * n + j] * m;
                          T* gvj = gv + (base + j) * width + c0;
                          for (std::size_t c = 0; c < dh; ++c) gvj[c] += w * go[c];
                        }
                      }
                      T dot = T(0);
                      for (std::size_t j = 0; j < n; ++j) dot += dp[i * n + j] * p[i * n + j];
                      for (std::size_t j = 0; j < n; ++j) ds[i * n + j] = p[i * n + j] * (dp[i * n + j] - dot) * scale;
                    }
                    for (std::size_t i = 0; i < n; ++i) {
                      for (std::size_t j = 0; j < n; ++j) {
                        const T d = ds[i * n + j];
                        if (gq != nullptr) {
                          T* gqi = gq + (base + i) * width + c0;
                          const T* kj = kv.data.data() + (base + j) * width + c0;
                          for (std::size_t c = 0; c < dh; ++c) gqi[c] += d * kj[c];
                        }
                        if (gk != nullptr) {
                          T* gkj = gk + (base + j) * width + c0;
                          const T* qi = qv.data.data() + (base + i) * width + c0;
                          for (std::size_t c = 0; c < dh; ++c) gkj[c] += d * qi[c];
                        }
                      }
                    }
                  }
                }
              });
}

template class Graph<float>;
template class Graph<double>;

}  // namespace tabxfer
