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

#ifndef AVJOINT_EVAL_HPP_
#define AVJOINT_EVAL_HPP_

#include <map>
#include <string>
#include <vector>

#include "avjoint/matrix.hpp"

namespace avjoint {

/// Greedy CTC decode: per-frame argmax (ties resolve to the lowest id),
/// collapse repeated symbols, drop blanks. Blank is the last symbol id.
std::vector<int> ctc_greedy_decode(const Matrix& logits);

std::vector<std::string> ids_to_names(const std::vector<int>& ids,
                                      const std::vector<std::string>& names);

/// Symbol folding table. Loaded from a text asset of "src dst" lines where
/// dst "-" deletes the symbol; blank lines are ignored. There is no comment
/// syntax because '#' is a legal symbol character (TIMIT's "h#"). The table
/// must be idempotent: every surviving dst maps to itself. Internally a
/// deletion is an empty dst.
struct PhoneMapping {
  std::map<std::string, std::string> table;
};

PhoneMapping load_phone_mapping(const std::string& path);
PhoneMapping parse_phone_mapping(const std::string& text,
                                 const std::string& origin);

/// Applies the fold to a symbol sequence. A symbol absent from the table is
/// an error naming it; scoring with a partial table would silently skew PER.
std::vector<std::string> apply_mapping(const std::vector<std::string>& symbols,
                                       const PhoneMapping& mapping);

struct EditCounts {
  int sub = 0;
  int ins = 0;  // hypothesis symbol with no reference counterpart
  int del = 0;  // reference symbol with no hypothesis counterpart
  int total() const { return sub + ins + del; }
};

/// Minimum-edit alignment with unit costs. Equal-cost moves resolve
/// substitution first, then insertion, then deletion, so the split into
/// counts is deterministic.
EditCounts edit_distance(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp);

struct ScoreReport {
  EditCounts totals;
  int ref_len = 0;     // after mapping, summed over utterances
  double per = 0.0;    // 100 * (sub+ins+del) / ref_len
  std::vector<EditCounts> per_utt;
};

/// Scores hypothesis transcriptions against references, folding both sides
/// through the mapping first when one is given.
ScoreReport score(const std::vector<std::vector<std::string>>& refs,
                  const std::vector<std::vector<std::string>>& hyps,
                  const PhoneMapping* mapping = nullptr);

// One training-curve row. The CSV column order is fixed; readers key on it.
struct EpochRecord {
  int epoch = 0;
  std::string phase;  // "enh", "asr" or "joint"
  double lambda = 0.0;
  double train_enh = 0.0;
  double train_asr = 0.0;
  double valid_enh = 0.0;
  double valid_asr = 0.0;
  double valid_per = 0.0;
};

/// Writes "epoch,phase,lambda,train_enh,train_asr,valid_enh,valid_asr,
/// valid_per" with nine significant digits. A non-finite value aborts with
/// an error naming the epoch; a curve with holes is worse than no curve.
void write_history_csv(const std::string& path,
                       const std::vector<EpochRecord>& rows);

std::vector<EpochRecord> read_history_csv(const std::string& path);

}  // namespace avjoint

#endif  // AVJOINT_EVAL_HPP_
