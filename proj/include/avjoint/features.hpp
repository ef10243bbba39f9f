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

#ifndef AVJOINT_FEATURES_HPP_
#define AVJOINT_FEATURES_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avjoint/matrix.hpp"
#include "avjoint/phones.hpp"

namespace avjoint {

/// T x N nonnegative magnitude frames.
struct Spectrogram {
  Matrix frames;
  int num_frames() const { return frames.rows; }
  int num_bins() const { return frames.cols; }
};

/// T x M landmark-motion components for the target speaker.
struct VisualFeatures {
  Matrix frames;
  int num_frames() const { return frames.rows; }
  int dim() const { return frames.cols; }
};

/// T x N nonnegative target frames (the clean utterance's magnitudes).
struct CleanTarget {
  Matrix frames;
};

/// Per-bin standard deviation of the clean targets over a training set,
/// floored at kEpsilon so the scaled sigmoid head never has zero range.
struct StdVector {
  static constexpr double kEpsilon = 1e-6;
  std::vector<double> d;
  int size() const { return static_cast<int>(d.size()); }
};

/// C x N nonnegative warp from linear-frequency bins to mel channels.
/// Rows sample triangles placed on the mel scale, so each row is unimodal
/// with at least one positive entry; column sums stay <= 1.
class MelFilterbank {
 public:
  Matrix weights;  // C x N

  int channels() const { return weights.rows; }
  int num_bins() const { return weights.cols; }
};

/// Triangular filterbank with C centers equally spaced on the mel scale
/// over [0, sample_rate/2]. With identity=true (requires C == N) the warp
/// is the identity and the spectrogram passes through unchanged.
/// Throws InvalidConfigError when C > N, or when some channel's triangle
/// covers no spectrogram bin (C too large for N at this sample rate).
MelFilterbank mel_filterbank(int channels, int num_bins, double sample_rate,
                             bool identity = false);

/// Per-frame warp: row t of the result is weights * s_t. T x C, nonnegative.
Matrix mel_warp(const MelFilterbank& m, const Spectrogram& s);

/// Magnitude spectrogram of a real signal: Hann window, frame count
/// 1 + floor((len - window_len)/hop), window_len/2 + 1 bins.
Spectrogram stft_magnitude(const std::vector<double>& samples, int window_len,
                           int hop);

struct Utterance {
  std::string id;
  Spectrogram mixture;
  CleanTarget clean;
  VisualFeatures visual;
  PhoneSequence labels;
  std::optional<CleanTarget> interferer_clean;  // present when generated mixed

  int num_frames() const { return mixture.num_frames(); }
};

/// A corpus bundles utterances with the dimensions and phone inventory they
/// share. num_symbols counts the CTC blank; phone_names lists the
/// num_symbols-1 real phones, id order.
struct Corpus {
  std::vector<Utterance> utterances;
  int num_bins = 0;     // N
  int visual_dim = 0;   // M
  int num_symbols = 0;  // P, including blank
  std::vector<std::string> phone_names;

  int size() const { return static_cast<int>(utterances.size()); }
};

StdVector compute_std_vector(const Corpus& corpus);

struct CorpusConfig {
  int num_utterances = 0;
  int t_min = 0;
  int t_max = 0;
  int num_bins = 0;    // N
  int visual_dim = 0;  // M
  int num_phones = 0;  // real phones; inventory size is num_phones + 1
  int labels_min = 1;
  int labels_max = 1;
  double interferer_gain = 1.0;
  double noise_level = 0.02;
  double visual_noise = 0.05;
};

/// Two-speaker synthetic corpus. Each utterance mixes a target source and
/// an interferer built from per-phone harmonic templates; the visual frames
/// follow the target's phone identity, so they disambiguate which source
/// carries the labels. Deterministic in (cfg, seed); mixtures satisfy
/// mixture = clean + interferer_clean elementwise.
Corpus synth_corpus(const CorpusConfig& cfg, uint64_t seed);

/// Checks the per-utterance invariants (shared T/N/M, label range and CTC
/// feasibility, nonnegative magnitudes). Throws InvalidInputError naming
/// the first offending utterance.
void validate_corpus(const Corpus& corpus);

}  // namespace avjoint

#endif  // AVJOINT_FEATURES_HPP_
