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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tabxfer/numcore/params.hpp"
#include "tabxfer/numcore/tensor.hpp"

namespace tabxfer {

class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, int node) : std::runtime_error(what), node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

// Contiguous row ranges [offsets[i], offsets[i+1]).
struct Segments {
  std::vector<std::size_t> offsets{0};

  static Segments from_lengths(std::span<const std::size_t> lengths);
  static Segments uniform(std::size_t count, std::size_t length);

  std::size_t count() const { return offsets.size() - 1; }
  std::size_t begin(std::size_t i) const { return offsets[i]; }
  std::size_t end(std::size_t i) const { return offsets[i + 1]; }
  std::size_t length(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
  std::size_t total() const { return offsets.back(); }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode tape. Each operation computes its value
// eagerly and records a local backward rule. A graph is single-use: build,
// optionally call backward() once, discard.
template <typename T>
class Graph {
 public:
  struct Options {
    bool training = false;
    std::uint64_t seed = 0;  // dropout stream
    bool check_finite = true;
  };

  Graph() : Graph(Options{}) {}
  explicit Graph(Options options) : options_(options) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool training() const { return options_.training; }
  std::size_t size() const { return nodes_.size(); }

  Var input(Tensor<T> value);
  Var variable(Tensor<T> value);
  // Binding the same parameter twice yields the same node.
  Var param(Parameter<T>& p);

  const Tensor<T>& value(Var v) const { return node(v).value; }
  bool has_grad(Var v) const { return !node(v).grad.empty(); }
  const Tensor<T>& grad(Var v) const;
  std::string_view op_name(Var v) const { return node(v).op; }

  void set_name(Var v, std::string name) { names_[std::move(name)] = v.id; }
  Var named(std::string_view name) const;

  void backward(Var loss);

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_row(Var a, Var row);
  Var mul_row(Var a, Var row);
  Var scale_rows(Var a, Var column);
  Var scale(Var a, T factor);
  Var add_scalar(Var a, T offset);
  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var softmax(Var a);
  Var log_softmax(Var a);
  Var layer_norm(Var a, T eps = T(1e-5));
  Var mean(Var a, int axis);
  Var sum(Var a);
  Var dropout(Var a, T rate);
  Var concat_rows(std::span<const Var> parts);
  Var concat_cols(std::span<const Var> parts);
  Var gather_rows(Var a, std::span<const std::size_t> index);
  Var cosine_rows(Var a, Var b);
  Var l2_normalize_rows(Var a);
  Var squared_error(Var a, Var b);
  Var segment_sum(Var a, const Segments& seg);
  Var segment_mean(Var a, const Segments& seg);
  Var segment_max(Var a, const Segments& seg);
  Var segment_softmax(Var a, const Segments& seg);
  // Multi-head scaled dot-product attention restricted to each segment.
  // q, k, v are [rows x heads*d_head]; keys are reduced in row order.
  Var segment_attention(Var q, Var k, Var v, const Segments& seg, std::size_t heads, T scale, T dropout_rate);

 private:
  using BackwardFn = std::function<void(Graph&, int)>;

  struct Node {
    std::string_view op;
    std::vector<int> inputs;
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
  };

  const Node& node(Var v) const;
  Node& node(Var v);
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  Tensor<T>& grad_buffer(int id);
  Var push(std::string_view op, std::vector<int> inputs, Tensor<T> value, BackwardFn backward);
  void check_rank2(std::string_view op, Var v) const;
  [[noreturn]] void shape_error(std::string_view op, const std::string& detail) const;

  Options options_;
  std::vector<Node> nodes_;
  std::map<const Parameter<T>*, int> bound_params_;
  std::map<std::string, int, std::less<>> names_;
  bool backward_done_ = false;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace tabxfer
