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

#include "tabxfer/numcore/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <type_traits>

#include "tabxfer/numcore/kernels.hpp"
#include "tabxfer/util/log.hpp"

namespace tabxfer {

template <typename T>
std::vector<std::string> update_set(const ParamStore<T>& params) {
  std::vector<std::string> names;
  for (const auto& [name, p] : params) {
    if (p.trainable) names.push_back(name);
  }
  return names;
}

template <typename T>
bool adam_step(ParamStore<T>& params, AdamState<T>& state) {
  const AdamConfig& c = state.config;
  if (!(c.lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");

  for (auto& [name, p] : params) {
    if (!p.trainable || p.grad.empty()) continue;
    if (p.grad.shape != p.value.shape) throw ShapeError("adam_step: gradient shape mismatch for " + name);
    for (T g : p.grad.data) {
      if (!std::isfinite(g)) {
        ++state.skipped;
        log_event("adam.skip", {{"parameter", name}, {"step", state.step}});
        return false;
      }
    }
  }

  ++state.step;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    auto [it, fresh] = state.moments.try_emplace(name);
    auto& [m, v] = it->second;
    if (fresh || m.shape != p.value.shape) {
      m = Tensor<T>(p.value.shape, T(0));
      v = Tensor<T>(p.value.shape, T(0));
    }
    if (p.grad.empty()) p.zero_grad();
    const std::size_t n = p.value.size();
    if constexpr (std::is_same_v<T, float>) {
      kernels::active().adam(n, p.value.data.data(), p.grad.data.data(), m.data.data(), v.data.data(),
                             static_cast<float>(c.lr), static_cast<float>(c.beta1), static_cast<float>(c.beta2),
                             static_cast<float>(c.eps), static_cast<float>(bias1), static_cast<float>(bias2));
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const T g = p.grad.data[i];
        m.data[i] = T(c.beta1) * m.data[i] + T(1.0 - c.beta1) * g;
        v.data[i] = T(c.beta2) * v.data[i] + T(1.0 - c.beta2) * g * g;
        const T m_hat = m.data[i] / T(bias1);
        const T v_hat = v.data[i] / T(bias2);
        p.value.data[i] -= T(c.lr) * m_hat / (std::sqrt(v_hat) + T(c.eps));
      }
    }
  }
  return true;
}

template <typename T>
double clip_grad_norm(ParamStore<T>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, p] : params) {
    if (!p.trainable) continue;
    for (T g : p.grad.data) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& [_, p] : params) {
      if (!p.trainable) continue;
      for (T& g : p.grad.data) g *= factor;
    }
  }
  return norm;
}

template bool adam_step(ParamStore<float>&, AdamState<float>&);
template bool adam_step(ParamStore<double>&, AdamState<double>&);
template double clip_grad_norm(ParamStore<float>&, double);
template double clip_grad_norm(ParamStore<double>&, double);
template std::vector<std::string> update_set(const ParamStore<float>&);
template std::vector<std::string> update_set(const ParamStore<double>&);

}  // namespace tabxfer
