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

#include <cmath>
#include <cstdint>
#include <string_view>

#include "tabxfer/numcore/random.hpp"
#include "tabxfer/numcore/tensor.hpp"

namespace tabxfer {

// Independent stream per parameter so adding a parameter does not shift
// the initialization of the others.
inline Rng param_rng(std::uint64_t seed, std::string_view name) {
  return Rng(derive_seed({seed, fnv1a64(name)}));
}

template <typename T>
Tensor<T> xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> t = Tensor<T>::matrix(fan_in, fan_out);
  for (T& v : t.data) v = static_cast<T>(rng.uniform(-limit, limit));
  return t;
}

template <typename T>
Tensor<T> normal_tensor(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Tensor<T> t = Tensor<T>::matrix(rows, cols);
  for (T& v : t.data) v = static_cast<T>(stddev * rng.normal());
  return t;
}

}  // namespace tabxfer
