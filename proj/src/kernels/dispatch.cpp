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

#include <cstdlib>
#include <cstring>
#include <iostream>

#include "avjoint/kernels.hpp"

namespace avjoint {
namespace kernels {

const Backend& active() {
  static const Backend& picked = []() -> const Backend& {
    const char* forced = std::getenv("AVJOINT_KERNELS");
    if (forced != nullptr) {
      if (std::strcmp(forced, "scalar") == 0) return scalar_backend();
      if (std::strcmp(forced, "avx2") == 0) {
        const Backend* v = avx2_backend();
        if (v != nullptr) return *v;
        std::cerr << "avjoint: AVJOINT_KERNELS=avx2 requested but this CPU "
                     "lacks AVX2/FMA; using scalar kernels\n";
        return scalar_backend();
      }
      std::cerr << "avjoint: unknown AVJOINT_KERNELS value '" << forced
                << "'; using default dispatch\n";
    }
    const Backend* v = avx2_backend();
    return v != nullptr ? *v : scalar_backend();
  }();
  return picked;
}

}  // namespace kernels
}  // namespace avjoint
