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

// Compiled with -mavx2 only. Nothing here may run unless the dispatcher has
// confirmed AVX2 support at runtime.
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "tabxfer/numcore/kernels.hpp"

namespace tabxfer::kernels {
namespace {

constexpr std::size_t kLanes = 8;

// Tail columns use the scalar recurrence so each element sees the same
// sequence of roundings as the reference.
void gemm_tail(std::size_t rows, std::size_t j0, std::size_t n, std::size_t k, const float* a, std::size_t lda,
               const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = j0; j < n; ++j) {
      float acc = accumulate ? c[r * ldc + j] : 0.0f;
      for (std::size_t p = 0; p < k; ++p) acc = acc + a[r * lda + p] * b[p * ldb + j];
      c[r * ldc + j] = acc;
    }
  }
}

// 4 rows x 16 columns register block.
inline void block_4x16(std::size_t k, const float* a, std::size_t lda, const float* b, std::size_t ldb, float* c,
                       std::size_t ldc, bool accumulate) {
  __m256 acc[4][2];
  for (int r = 0; r < 4; ++r) {
    if (accumulate) {
      acc[r][0] = _mm256_loadu_ps(c + r * ldc);
      acc[r][1] = _mm256_loadu_ps(c + r * ldc + kLanes);
    } else {
      acc[r][0] = _mm256_setzero_ps();
      acc[r][1] = _mm256_setzero_ps();
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b + p * ldb);
    const __m256 b1 = _mm256_loadu_ps(b + p * ldb + kLanes);
    for (int r = 0; r < 4; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + r * lda + p);
      acc[r][0] = _mm256_add_ps(acc[r][0], _mm256_mul_ps(av, b0));
      acc[r][1] = _mm256_add_ps(acc[r][1], _mm256_mul_ps(av, b1));
    }
  }
  for (int r = 0; r < 4; ++r) {
    _mm256_storeu_ps(c + r * ldc, acc[r][0]);
    _mm256_storeu_ps(c + r * ldc + kLanes, acc[r][1]);
  }
}

inline void block_1x8(std::size_t k, const float* a, const float* b, std::size_t ldb, float* c, bool accumulate) {
  __m256 acc = accumulate ? _mm256_loadu_ps(c) : _mm256_setzero_ps();
  for (std::size_t p = 0; p < k; ++p) {
    acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_broadcast_ss(a + p), _mm256_loadu_ps(b + p * ldb)));
  }
  _mm256_storeu_ps(c, acc);
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda, const float* b,
               std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  const std::size_t n16 = n - n % 16;
  const std::size_t n8 = n - n % kLanes;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    for (std::size_t j = 0; j < n16; j += 16) {
      block_4x16(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc, accumulate);
    }
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t j = n16; j < n8; j += kLanes) {
        block_1x8(k, a + (i + r) * lda, b + j, ldb, c + (i + r) * ldc + j, accumulate);
      }
    }
    if (n8 < n) gemm_tail(4, n8, n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate);
  }
  for (; i < m; ++i) {
    for (std::size_t j = 0; j < n8; j += kLanes) {
      block_1x8(k, a + i * lda, b + j, ldb, c + i * ldc + j, accumulate);
    }
    if (n8 < n) gemm_tail(1, n8, n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate);
  }
}

void axpy_avx2(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256 t = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), t));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void add_avx2(std::size_t n, const float* x, const float* y, float* out) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void mul_avx2(std::size_t n, const float* x, const float* y, float* out) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void relu_avx2(std::size_t n, const float* x, float* out) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 keep = _mm256_cmp_ps(v, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(out + i, _mm256_and_ps(keep, v));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_avx2(std::size_t n, const float* x, const float* gy, float* gx) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256 keep = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 g = _mm256_and_ps(keep, _mm256_loadu_ps(gy + i));
    _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), g));
  }
  for (; i < n; ++i) gx[i] = gx[i] + (x[i] > 0.0f ? gy[i] : 0.0f);
}

void adam_avx2(std::size_t n, float* param, const float* grad, float* m, float* v, float lr, float beta1,
               float beta2, float eps, float bias1, float bias2) {
  const float one_minus_b1 = 1.0f - beta1;
  const float one_minus_b2 = 1.0f - beta2;
  const __m256 vb1 = _mm256_set1_ps(beta1), vb2 = _mm256_set1_ps(beta2);
  const __m256 vc1 = _mm256_set1_ps(one_minus_b1), vc2 = _mm256_set1_ps(one_minus_b2);
  const __m256 vbias1 = _mm256_set1_ps(bias1), vbias2 = _mm256_set1_ps(bias2);
  const __m256 veps = _mm256_set1_ps(eps), vlr = _mm256_set1_ps(lr);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(vc1, g));
    const __m256 vi =
        _mm256_add_ps(_mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)), _mm256_mul_ps(vc2, _mm256_mul_ps(g, g)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 m_hat = _mm256_div_ps(mi, vbias1);
    const __m256 v_hat = _mm256_div_ps(vi, vbias2);
    const __m256 step = _mm256_mul_ps(vlr, _mm256_div_ps(m_hat, _mm256_add_ps(_mm256_sqrt_ps(v_hat), veps)));
    _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), step));
  }
  for (; i < n; ++i) {
    const float g = grad[i];
    m[i] = beta1 * m[i] + one_minus_b1 * g;
    v[i] = beta2 * v[i] + one_minus_b2 * (g * g);
    const float m_hat = m[i] / bias1;
    const float v_hat = v[i] / bias2;
    param[i] = param[i] - lr * (m_hat / (std::sqrt(v_hat) + eps));
  }
}

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{Isa::avx2, gemm_avx2, axpy_avx2, add_avx2, mul_avx2,
                                 relu_avx2, relu_backward_avx2, adam_avx2};
  return table;
}

}  // namespace tabxfer::kernels
