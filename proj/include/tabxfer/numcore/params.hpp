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
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tabxfer/numcore/tensor.hpp"

namespace tabxfer {

template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  void zero_grad() { grad = Tensor<T>(value.shape, T(0)); }
};

// Named learnable tensors. Iteration order is lexicographic by name, which
// fixes the order of every reduction over parameters.
template <typename T>
class ParamStore {
 public:
  using Map = std::map<std::string, Parameter<T>, std::less<>>;

  Parameter<T>& add(const std::string& name, Tensor<T> value, bool trainable = true) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw std::invalid_argument("parameter '" + name + "' already exists");
    it->second.value = std::move(value);
    it->second.trainable = trainable;
    return it->second;
  }

  Parameter<T>& at(std::string_view name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
    return it->second;
  }
  const Parameter<T>& at(std::string_view name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
    return it->second;
  }

  bool contains(std::string_view name) const { return params_.find(name) != params_.end(); }

  std::size_t erase_prefix(std::string_view prefix) {
    std::size_t erased = 0;
    for (auto it = params_.begin(); it != params_.end();) {
      if (std::string_view(it->first).starts_with(prefix)) {
        it = params_.erase(it);
        ++erased;
      } else {
        ++it;
      }
    }
    return erased;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, _] : params_) out.push_back(name);
    return out;
  }

  void zero_grad() {
    for (auto& [_, p] : params_) p.zero_grad();
  }

  std::size_t scalar_count(std::string_view prefix = {}) const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) {
      if (std::string_view(name).starts_with(prefix)) n += p.value.size();
    }
    return n;
  }

  std::size_t size() const { return params_.size(); }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, p] : params_) out.add(name, p.value.template cast<U>(), p.trainable);
    return out;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  Map params_;
};

}  // namespace tabxfer
