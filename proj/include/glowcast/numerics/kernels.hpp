// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision inner loops used by the tensor ops. Every kernel has
// a portable scalar reference and, on x86-64, an AVX2+FMA variant. The active
// table is picked once at startup from CPUID and can be forced to the scalar
// path with GLOWCAST_SIMD=scalar.
//
// All matrices are row-major and contiguous. Kernels accumulate into their
// output (C += ...), callers zero it when they want assignment.
#pragma once

#include <cstddef>
#include <string_view>

namespace glowcast::kernels {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  // c[m x p] += a[m x k] * b[k x p]
  void (*gemm)(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t p);
  // c[m x p] += a[m x k] * b[p x k]^T
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t p);
  // c[k x p] += a[m x k]^T * b[m x p]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t p);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = a + b, a - b, a * b (out may alias a or b)
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // y += a * b
  void (*mul_acc)(const double* a, const double* b, double* y, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_table();
/// Returns nullptr when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool cpu_supports(Isa isa);

/// Table used by the tensor ops.
const KernelTable& active();
Isa active_isa();
std::string_view isa_name(Isa isa);

/// Overrides dispatch (tests and benchmarks). Throws ContractError if the CPU
/// lacks the requested instruction set.
void force_isa(Isa isa);

}  // namespace glowcast::kernels
