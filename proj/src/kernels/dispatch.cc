// Copyright 2026 The avdiar Authors.
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
#include <cstring>

#include "avdiar/kernels.h"

namespace avdiar::kernels {

#ifndef AVDIAR_HAVE_AVX2
const KernelTable* Avx2Kernels() { return nullptr; }
#endif

bool CpuSupportsAvx2() {
#if defined(AVDIAR_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

const KernelTable* DefaultTable() {
  const char* forced = std::getenv("AVDIAR_ISA");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) {
    return &ScalarKernels();
  }
  if (CpuSupportsAvx2() && Avx2Kernels() != nullptr) return Avx2Kernels();
  return &ScalarKernels();
}

std::atomic<const KernelTable*>& ActiveSlot() {
  static std::atomic<const KernelTable*> slot{DefaultTable()};
  return slot;
}

}  // namespace

const KernelTable& Active() { return *ActiveSlot().load(std::memory_order_acquire); }

bool SetActiveIsa(Isa isa) {
  if (isa == Isa::kScalar) {
    ActiveSlot().store(&ScalarKernels(), std::memory_order_release);
    return true;
  }
  if (!CpuSupportsAvx2() || Avx2Kernels() == nullptr) return false;
  ActiveSlot().store(Avx2Kernels(), std::memory_order_release);
  return true;
}

std::string_view IsaName(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace avdiar::kernels
