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

#ifndef AVJOINT_MATRIX_HPP_
#define AVJOINT_MATRIX_HPP_

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace avjoint {

/// Dense row-major matrix of doubles. A 1-D array is a Matrix with one row.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
    assert(r >= 0 && c >= 0);
  }

  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const {
    return data.data() + static_cast<size_t>(r) * cols;
  }

  double& at(int r, int c) {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    return data[static_cast<size_t>(r) * cols + c];
  }
  double at(int r, int c) const {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    return data[static_cast<size_t>(r) * cols + c];
  }

  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
  void set_zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const Matrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

}  // namespace avjoint

#endif  // AVJOINT_MATRIX_HPP_
