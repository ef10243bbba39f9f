// Copyright 2026 The avjoint Authors
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

#include "avjoint/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

namespace avjoint {
namespace kernels {
namespace {

// AVX2/FMA variants, 4 doubles per register.
//
// Elementwise kernels keep the scalar operation order per element and use
// separate mul/add (no fused ops), so they are bit-identical to the
// reference. Row reductions use FMA with 4 independent accumulators and
// only agree with the reference up to rounding.

inline double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double row_dot(const double* a, const double* b, int n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8),
                           _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12),
                           _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
  }
  double acc = hsum4(_mm256_add_pd(_mm256_add_pd(acc0, acc1),
                                   _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void v_matvec(const double* w, const double* x, double* y, int rows,
              int cols) {
  for (int r = 0; r < rows; ++r) {
    y[r] = row_dot(w + static_cast<size_t>(r) * cols, x, cols);
  }
}

void v_matvec_acc(const double* w, const double* x, double* y, int rows,
                  int cols) {
  for (int r = 0; r < rows; ++r) {
    y[r] += row_dot(w + static_cast<size_t>(r) * cols, x, cols);
  }
}

void v_matvec_t_acc(const double* w, const double* dy, double* dx, int rows,
                    int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<size_t>(r) * cols;
    const __m256d vdy = _mm256_set1_pd(dy[r]);
    int c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(wr + c), vdy);
      _mm256_storeu_pd(dx + c, _mm256_add_pd(_mm256_loadu_pd(dx + c), prod));
    }
    for (; c < cols; ++c) dx[c] += wr[c] * dy[r];
  }
}

void v_outer_acc(double* dw, const double* dy, const double* x, int rows,
                 int cols) {
  for (int r = 0; r < rows; ++r) {
    double* dwr = dw + static_cast<size_t>(r) * cols;
    const __m256d vdy = _mm256_set1_pd(dy[r]);
    int c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d prod = _mm256_mul_pd(vdy, _mm256_loadu_pd(x + c));
      _mm256_storeu_pd(dwr + c,
                       _mm256_add_pd(_mm256_loadu_pd(dwr + c), prod));
    }
    for (; c < cols; ++c) dwr[c] += dy[r] * x[c];
  }
}

void v_axpy(double a, const double* x, double* y, int n) {
  const __m256d va = _mm256_set1_pd(a);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void v_scale(double a, double* x, int n) {
  const __m256d va = _mm256_set1_pd(a);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
  }
  for (; i < n; ++i) x[i] *= a;
}

double v_dot(const double* x, const double* y, int n) {
  return row_dot(x, y, n);
}

double v_sumsq(const double* x, int n) { return row_dot(x, x, n); }

double v_sumsq_diff(const double* a, const double* b, int n) {
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum4(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void v_adam_update(double* p, double* m, double* v, const double* g, int n,
                   double lr, double beta1, double beta2, double eps,
                   double bc1, double bc2) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb1c = _mm256_set1_pd(1.0 - beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vb2c = _mm256_set1_pd(1.0 - beta2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vbc1 = _mm256_set1_pd(bc1);
  const __m256d vbc2 = _mm256_set1_pd(bc2);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                               _mm256_mul_pd(vb1c, vg));
    __m256d vv = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(vb2c, _mm256_mul_pd(vg, vg)));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    __m256d mhat = _mm256_mul_pd(vm, vbc1);
    __m256d vhat = _mm256_mul_pd(vv, vbc2);
    __m256d den = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    __m256d upd = _mm256_mul_pd(vlr, _mm256_div_pd(mhat, den));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
    const double mhat = m[i] * bc1;
    const double vhat = v[i] * bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
  }
}

constexpr Backend kAvx2 = {
    "avx2",   v_matvec, v_matvec_acc, v_matvec_t_acc, v_outer_acc,
    v_axpy,   v_scale,  v_dot,        v_sumsq,        v_sumsq_diff,
    v_adam_update,
};

}  // namespace

const Backend* avx2_backend() {
  static const Backend* ptr = [] {
    bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return ok ? &kAvx2 : nullptr;
  }();
  return ptr;
}

}  // namespace kernels
}  // namespace avjoint

#else  // non-x86 build: no vector variant

namespace avjoint {
namespace kernels {

const Backend* avx2_backend() { return nullptr; }

}  // namespace kernels
}  // namespace avjoint

#endif
