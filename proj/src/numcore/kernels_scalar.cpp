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

#include <algorithm>
#include <cmath>

#include "tabxfer/numcore/kernels.hpp"

namespace tabxfer::kernels {
namespace {

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda, const float* b,
                 std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * ldc;
    if (!accumulate) std::fill(crow, crow + n, 0.0f);
    const float* arow = a + i * lda;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = arow[p];
      const float* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

void axpy_scalar(std::size_t n, float alpha, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void add_scalar(std::size_t n, const float* x, const float* y, float* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void mul_scalar(std::size_t n, const float* x, const float* y, float* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void relu_scalar(std::size_t n, const float* x, float* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_scalar(std::size_t n, const float* x, const float* gy, float* gx) {
  for (std::size_t i = 0; i < n; ++i) gx[i] = gx[i] + (x[i] > 0.0f ? gy[i] : 0.0f);
}

void adam_scalar(std::size_t n, float* param, const float* grad, float* m, float* v, float lr, float beta1,
                 float beta2, float eps, float bias1, float bias2) {
  const float one_minus_b1 = 1.0f - beta1;
  const float one_minus_b2 = 1.0f - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const float g = grad[i];
    m[i] = beta1 * m[i] + one_minus_b1 * g;
    v[i] = beta2 * v[i] + one_minus_b2 * (g * g);
    const float m_hat = m[i] / bias1;
    const float v_hat = v[i] / bias2;
    param[i] = param[i] - lr * (m_hat / (std::sqrt(v_hat) + eps));
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::scalar, gemm_scalar, axpy_scalar, add_scalar, mul_scalar,
                                 relu_scalar, relu_backward_scalar, adam_scalar};
  return table;
}

}  // namespace tabxfer::kernels
