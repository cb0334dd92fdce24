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

#pragma once

// Dense double-precision inner loops used by the tensor engine and the
// signal-processing code. Every kernel has a portable scalar reference; an
// AVX2 variant is compiled in a separate translation unit and selected at
// runtime when the CPU supports it.
//
// The axpy-shaped kernels (axpy, gemm_nn, gemm_tn) accumulate each output
// element in the same order as the scalar reference without fused
// multiply-add, so both variants are bit-identical. Reductions (dot,
// gemm_nt) use lane-parallel partial sums and agree to rounding only.

#include <cstddef>
#include <span>
#include <string_view>

namespace avdiar::kernels {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // c[m x n] += a[m x k] * b[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k,
                  const double* a, const double* b, double* c);
  // c[m x n] += a[m x k] * b[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k,
                  const double* a, const double* b, double* c);
  // c[m x n] += a[k x m]^T * b[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k,
                  const double* a, const double* b, double* c);
};

const KernelTable& ScalarKernels();

// nullptr when the AVX2 variants were not compiled in.
const KernelTable* Avx2Kernels();

bool CpuSupportsAvx2();

// The table in use. Defaults to the best supported ISA; the environment
// variable AVDIAR_ISA=scalar forces the reference kernels.
const KernelTable& Active();

// Returns false if the requested ISA is unavailable on this machine.
bool SetActiveIsa(Isa isa);

std::string_view IsaName(Isa isa);

inline double Dot(std::span<const double> a, std::span<const double> b) {
  return Active().dot(a.data(), b.data(), a.size());
}

inline void Axpy(double alpha, std::span<const double> x, std::span<double> y) {
  Active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace avdiar::kernels
