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

#ifndef AVJOINT_PHONES_HPP_
#define AVJOINT_PHONES_HPP_

#include <vector>

namespace avjoint {

// Phone label sequence. Ids live in [0, P-2] for an inventory of P output
// symbols; id P-1 is the CTC blank by convention and never appears in a
// label sequence. Corpus labels are non-empty; the empty sequence is still
// meaningful to the CTC loss (the all-blank alignment).
struct PhoneSequence {
  std::vector<int> symbols;

  bool operator==(const PhoneSequence& o) const { return symbols == o.symbols; }
  int length() const { return static_cast<int>(symbols.size()); }

  /// Frames needed for at least one valid CTC alignment: one per label plus
  /// one separating blank per adjacent repeat.
  int min_frames() const {
    int need = length();
    for (size_t i = 1; i < symbols.size(); ++i) {
      if (symbols[i] == symbols[i - 1]) ++need;
    }
    return need;
  }
};

}  // namespace avjoint

#endif  // AVJOINT_PHONES_HPP_
