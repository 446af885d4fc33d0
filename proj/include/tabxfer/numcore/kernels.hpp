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
#include <string_view>

// Float32 inner loops with one scalar reference and optional SIMD variants.
// Every variant performs the same IEEE operations in the same order per
// output element (no FMA, no reassociation), so all variants are bitwise
// interchangeable and the selection never changes a result.
namespace tabxfer::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;

  // C[m x n] = (accumulate ? C : 0) + A[m x k] * B[k x n]; row-major with
  // leading dimensions. The sum over k runs in increasing k order.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
               const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);

  // y[i] += alpha * x[i]
  void (*axpy)(std::size_t n, float alpha, const float* x, float* y);
  // out[i] = x[i] + y[i]
  void (*add)(std::size_t n, const float* x, const float* y, float* out);
  // out[i] = x[i] * y[i]
  void (*mul)(std::size_t n, const float* x, const float* y, float* out);
  // out[i] = max(x[i], 0)
  void (*relu)(std::size_t n, const float* x, float* out);
  // gx[i] += x[i] > 0 ? gy[i] : 0
  void (*relu_backward)(std::size_t n, const float* x, const float* gy, float* gx);

  // Bias-corrected Adam update over one parameter buffer.
  void (*adam)(std::size_t n, float* param, const float* grad, float* m, float* v, float lr, float beta1,
               float beta2, float eps, float bias1, float bias2);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const KernelTable* avx2_kernels();

// The table every caller should use. Chosen once at startup from CPU
// features; TABXFER_ISA=scalar in the environment forces the reference.
const KernelTable& active();

// Test hook: override the active table. Returns false if unavailable.
bool select(Isa isa);

}  // namespace tabxfer::kernels
