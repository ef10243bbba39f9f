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

#ifndef AVJOINT_CORPUS_IO_HPP_
#define AVJOINT_CORPUS_IO_HPP_

#include <string>

#include "avjoint/features.hpp"

namespace avjoint {

// On-disk corpus layout, one directory per corpus:
//   manifest.json   ids, per-utterance frame counts, dims (N, M, P), phones
//   <id>.bin        4 x u64 little-endian length table (element counts of
//                   mixture, clean, visual, interferer; 0 when absent)
//                   followed by the arrays as little-endian f64, in order
//   <id>.phn        whitespace-separated phone symbols
// The round trip is bit-exact for finite values.

void save_corpus(const Corpus& corpus, const std::string& dir);

/// Throws FormatError naming the offending utterance on any mismatch or
/// truncation; never returns a partial corpus.
Corpus load_corpus(const std::string& dir);

}  // namespace avjoint

#endif  // AVJOINT_CORPUS_IO_HPP_
