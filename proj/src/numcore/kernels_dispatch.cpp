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

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "tabxfer/numcore/kernels.hpp"

namespace tabxfer::kernels {

#if defined(TABXFER_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(TABXFER_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* detect() {
  const char* forced = std::getenv("TABXFER_ISA");
  if (forced != nullptr && std::string_view(forced) == "scalar") return &scalar_kernels();
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{detect()};
  return current;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable* avx2_kernels() {
#if defined(TABXFER_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

bool select(Isa isa) {
  const KernelTable* t = isa == Isa::scalar ? &scalar_kernels() : avx2_kernels();
  if (t == nullptr) return false;
  slot().store(t, std::memory_order_relaxed);
  return true;
}

}  // namespace tabxfer::kernels
