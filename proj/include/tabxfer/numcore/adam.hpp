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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tabxfer/numcore/params.hpp"

namespace tabxfer {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::int64_t skipped = 0;
  std::map<std::string, std::pair<Tensor<T>, Tensor<T>>, std::less<>> moments;  // name -> (m, v)
};

// One bias-corrected Adam update over every trainable parameter, reading
// Parameter::grad. If any gradient holds a non-finite value the whole step
// is skipped (state untouched apart from the skip counter) and false is
// returned.
template <typename T>
bool adam_step(ParamStore<T>& params, AdamState<T>& state);

// Scales all trainable gradients so their global L2 norm is at most
// max_norm. Returns the norm before clipping.
template <typename T>
double clip_grad_norm(ParamStore<T>& params, double max_norm);

// Names adam_step would touch, in update order.
template <typename T>
std::vector<std::string> update_set(const ParamStore<T>& params);

}  // namespace tabxfer
