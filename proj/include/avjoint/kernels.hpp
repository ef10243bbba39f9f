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

#ifndef AVJOINT_KERNELS_HPP_
#define AVJOINT_KERNELS_HPP_

namespace avjoint {
namespace kernels {

// Dense inner loops behind the recurrent nets, the mel warp and the
// optimizer. Two implementations share this table: a scalar reference
// and an AVX2 variant picked at runtime.
//
// Exactness contract, checked by the equivalence tests:
//  * elementwise / fixed-accumulation-order kernels (axpy, scale,
//    outer_acc, matvec_t_acc, adam_update) are bit-identical to the
//    scalar reference;
//  * row-reduction kernels (matvec, matvec_acc, dot, sumsq, sumsq_diff)
//    may re-associate the sum and agree only to rounding.
struct Backend {
  const char* name;

  // y = W x           (W row-major, rows x cols)
  void (*matvec)(const double* w, const double* x, double* y, int rows,
                 int cols);
  // y += W x
  void (*matvec_acc)(const double* w, const double* x, double* y, int rows,
                     int cols);
  // dx += W^T dy      (accumulation order over rows preserved)
  void (*matvec_t_acc)(const double* w, const double* dy, double* dx, int rows,
                       int cols);
  // dW += dy x^T
  void (*outer_acc)(double* dw, const double* dy, const double* x, int rows,
                    int cols);
  // y += a x
  void (*axpy)(double a, const double* x, double* y, int n);
  // x *= a
  void (*scale)(double a, double* x, int n);
  double (*dot)(const double* x, const double* y, int n);
  double (*sumsq)(const double* x, int n);
  // sum_i (a[i] - b[i])^2
  double (*sumsq_diff)(const double* a, const double* b, int n);
  // Adam step on one array. bc1/bc2 are the bias-correction factors
  // 1/(1-beta1^t) and 1/(1-beta2^t).
  void (*adam_update)(double* p, double* m, double* v, const double* g, int n,
                      double lr, double beta1, double beta2, double eps,
                      double bc1, double bc2);
};

/// Portable reference implementation.
const Backend& scalar_backend();

/// AVX2+FMA implementation, or nullptr when the CPU lacks support.
const Backend* avx2_backend();

/// Backend selected at startup: AVX2 when available, else scalar.
/// AVJOINT_KERNELS=scalar|avx2 in the environment forces the choice.
const Backend& active();

}  // namespace kernels
}  // namespace avjoint

#endif  // AVJOINT_KERNELS_HPP_
