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

#include <cmath>

#include "avjoint/kernels.hpp"

namespace avjoint {
namespace kernels {
namespace {

// Reference kernels. Plain left-to-right loops; the SIMD variants are
// validated against these.

void s_matvec(const double* w, const double* x, double* y, int rows,
              int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

void s_matvec_acc(const double* w, const double* x, double* y, int rows,
                  int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

void s_matvec_t_acc(const double* w, const double* dy, double* dx, int rows,
                    int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<size_t>(r) * cols;
    const double dyr = dy[r];
    for (int c = 0; c < cols; ++c) dx[c] += wr[c] * dyr;
  }
}

void s_outer_acc(double* dw, const double* dy, const double* x, int rows,
                 int cols) {
  for (int r = 0; r < rows; ++r) {
    double* dwr = dw + static_cast<size_t>(r) * cols;
    const double dyr = dy[r];
    for (int c = 0; c < cols; ++c) dwr[c] += dyr * x[c];
  }
}

void s_axpy(double a, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

void s_scale(double a, double* x, int n) {
  for (int i = 0; i < n; ++i) x[i] *= a;
}

double s_dot(const double* x, const double* y, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double s_sumsq(const double* x, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double s_sumsq_diff(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void s_adam_update(double* p, double* m, double* v, const double* g, int n,
                   double lr, double beta1, double beta2, double eps,
                   double bc1, double bc2) {
  for (int i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
    const double mhat = m[i] * bc1;
    const double vhat = v[i] * bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
  }
}

constexpr Backend kScalar = {
    "scalar",   s_matvec, s_matvec_acc, s_matvec_t_acc, s_outer_acc,
    s_axpy,     s_scale,  s_dot,        s_sumsq,        s_sumsq_diff,
    s_adam_update,
};

}  // namespace

const Backend& scalar_backend() { return kScalar; }

}  // namespace kernels
}  // namespace avjoint
