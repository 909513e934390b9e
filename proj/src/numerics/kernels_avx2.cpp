// SPDX-License-Identifier: Apache-2.0
//
// Built with -mavx2 -mfma. Nothing in this file may run before the dispatcher
// has confirmed CPU support.
#include "glowcast/numerics/kernels.hpp"

#if defined(GLOWCAST_HAVE_AVX2)
#include <immintrin.h>

namespace glowcast::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * p;
    std::size_t j = 0;
    for (; j + 16 <= p; j += 16) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      __m256d c1 = _mm256_loadu_pd(crow + j + 4);
      __m256d c2 = _mm256_loadu_pd(crow + j + 8);
      __m256d c3 = _mm256_loadu_pd(crow + j + 12);
      for (std::size_t kk = 0; kk < k; ++kk) {
        const __m256d aik = _mm256_broadcast_sd(arow + kk);
        const double* brow = b + kk * p + j;
        c0 = _mm256_fmadd_pd(aik, _mm256_loadu_pd(brow), c0);
        c1 = _mm256_fmadd_pd(aik, _mm256_loadu_pd(brow + 4), c1);
        c2 = _mm256_fmadd_pd(aik, _mm256_loadu_pd(brow + 8), c2);
        c3 = _mm256_fmadd_pd(aik, _mm256_loadu_pd(brow + 12), c3);
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
      _mm256_storeu_pd(crow + j + 8, c2);
      _mm256_storeu_pd(crow + j + 12, c3);
    }
    for (; j + 4 <= p; j += 4) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      for (std::size_t kk = 0; kk < k; ++kk) {
        c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + kk),
                             _mm256_loadu_pd(b + kk * p + j), c0);
      }
      _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < p; ++j) {
      double acc = crow[j];
      for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * b[kk * p + j];
      crow[j] = acc;
    }
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) c[i * p + j] += dot(a + i * k, b + j * k, k);
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) axpy(arow[kk], brow, c + kk * p, p);
  }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a[i] * b[i];
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{gemm, gemm_nt, gemm_tn, axpy, add,
                                 sub,  mul,     mul_acc, dot};
  return &table;
}

}  // namespace glowcast::kernels

#else

namespace glowcast::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace glowcast::kernels

#endif
