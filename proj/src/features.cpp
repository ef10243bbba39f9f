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

#include "avjoint/features.hpp"

#include <cmath>
#include <numbers>

#include "avjoint/error.hpp"
#include "avjoint/kernels.hpp"
#include "avjoint/rng.hpp"

namespace avjoint {

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) {
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

}  // namespace

Spectrogram stft_magnitude(const std::vector<double>& samples, int window_len,
                           int hop) {
  if (window_len < 1 || hop < 1 || hop > window_len) {
    throw InvalidInputError("stft_magnitude: need window_len >= hop >= 1");
  }
  const int len = static_cast<int>(samples.size());
  if (len < window_len) {
    throw InvalidInputError("stft_magnitude: signal shorter than one window");
  }
  const int frames = 1 + (len - window_len) / hop;
  const int bins = window_len / 2 + 1;

  std::vector<double> window(window_len);
  for (int n = 0; n < window_len; ++n) {
    window[n] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / window_len);
  }
  // direct DFT with precomputed twiddles; window sizes here are small
  std::vector<double> cos_tab(static_cast<size_t>(bins) * window_len);
  std::vector<double> sin_tab(static_cast<size_t>(bins) * window_len);
  for (int k = 0; k < bins; ++k) {
    for (int n = 0; n < window_len; ++n) {
      const double ang = 2.0 * std::numbers::pi * k * n / window_len;
      cos_tab[static_cast<size_t>(k) * window_len + n] = std::cos(ang);
      sin_tab[static_cast<size_t>(k) * window_len + n] = std::sin(ang);
    }
  }

  Spectrogram out;
  out.frames = Matrix(frames, bins);
  std::vector<double> buf(window_len);
  for (int t = 0; t < frames; ++t) {
    const double* x = samples.data() + static_cast<size_t>(t) * hop;
    for (int n = 0; n < window_len; ++n) buf[n] = x[n] * window[n];
    double* row = out.frames.row(t);
    const auto& k = kernels::active();
    for (int b = 0; b < bins; ++b) {
      const double re =
          k.dot(cos_tab.data() + static_cast<size_t>(b) * window_len,
                buf.data(), window_len);
      const double im =
          k.dot(sin_tab.data() + static_cast<size_t>(b) * window_len,
                buf.data(), window_len);
      row[b] = std::hypot(re, im);
    }
  }
  return out;
}

MelFilterbank mel_filterbank(int channels, int num_bins, double sample_rate,
                             bool identity) {
  if (channels < 1 || num_bins < 1 || channels > num_bins) {
    throw InvalidConfigError("mel_filterbank: need 1 <= channels <= bins");
  }
  MelFilterbank fb;
  fb.weights = Matrix(channels, num_bins);
  if (identity) {
    if (channels != num_bins) {
      throw InvalidConfigError(
          "mel_filterbank: identity mode requires channels == bins");
    }
    for (int c = 0; c < channels; ++c) fb.weights.at(c, c) = 1.0;
    return fb;
  }
  if (sample_rate <= 0.0) {
    throw InvalidConfigError("mel_filterbank: sample_rate must be positive");
  }

  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges_hz(channels + 2);
  for (int i = 0; i < channels + 2; ++i) {
    edges_hz[i] = mel_to_hz(mel_max * i / (channels + 1));
  }

  // bin k sits at k * (sr/2) / (bins-1); a single bin sits at DC
  const double bin_hz =
      num_bins > 1 ? (sample_rate / 2.0) / (num_bins - 1) : 0.0;
  for (int c = 0; c < channels; ++c) {
    const double lo = edges_hz[c];
    const double mid = edges_hz[c + 1];
    const double hi = edges_hz[c + 2];
    bool any = false;
    for (int b = 0; b < num_bins; ++b) {
      const double f = b * bin_hz;
      double w = 0.0;
      if (f > lo && f < mid) {
        w = (f - lo) / (mid - lo);
      } else if (f == mid) {
        w = 1.0;
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      fb.weights.at(c, b) = w;
      any = any || w > 0.0;
    }
    if (!any) {
      throw InvalidConfigError(
          "mel_filterbank: channel " + std::to_string(c) +
          " covers no spectrogram bin; reduce channels or use identity mode");
    }
  }
  return fb;
}

Matrix mel_warp(const MelFilterbank& m, const Spectrogram& s) {
  if (m.num_bins() != s.num_bins()) {
    throw InvalidInputError("mel_warp: filterbank bins " +
                            std::to_string(m.num_bins()) +
                            " != spectrogram bins " +
                            std::to_string(s.num_bins()));
  }
  Matrix out(s.num_frames(), m.channels());
  const auto& k = kernels::active();
  for (int t = 0; t < s.num_frames(); ++t) {
    k.matvec(m.weights.data.data(), s.frames.row(t), out.row(t), m.channels(),
             m.num_bins());
  }
  return out;
}

StdVector compute_std_vector(const Corpus& corpus) {
  if (corpus.utterances.empty()) {
    throw InvalidInputError("compute_std_vector: empty corpus");
  }
  const int bins = corpus.utterances.front().clean.frames.cols;
  int64_t total_frames = 0;
  std::vector<double> mean(bins, 0.0);
  for (const Utterance& u : corpus.utterances) {
    if (u.clean.frames.cols != bins) {
      throw InvalidInputError(
          "compute_std_vector: inconsistent bin count in utterance " + u.id);
    }
    for (int t = 0; t < u.clean.frames.rows; ++t) {
      const double* row = u.clean.frames.row(t);
      for (int b = 0; b < bins; ++b) mean[b] += row[b];
    }
    total_frames += u.clean.frames.rows;
  }
  for (int b = 0; b < bins; ++b) mean[b] /= static_cast<double>(total_frames);

  std::vector<double> var(bins, 0.0);
  for (const Utterance& u : corpus.utterances) {
    for (int t = 0; t < u.clean.frames.rows; ++t) {
      const double* row = u.clean.frames.row(t);
      for (int b = 0; b < bins; ++b) {
        const double dev = row[b] - mean[b];
        var[b] += dev * dev;
      }
    }
  }

  StdVector sv;
  sv.d.resize(bins);
  for (int b = 0; b < bins; ++b) {
    // population variance
    const double s = std::sqrt(var[b] / static_cast<double>(total_frames));
    sv.d[b] = std::max(s, StdVector::kEpsilon);
  }
  return sv;
}

namespace {

// Triangular wave in [0, 1] with the given period; arithmetic only, so the
// generated corpora are bit-identical on every platform.
double tri_wave(int t, int period) {
  const int phase = t % period;
  const int half = period / 2;
  return phase <= half ? static_cast<double>(phase) / half
                       : static_cast<double>(period - phase) / (period - half);
}

// Per-phone magnitude template: a small set of harmonic peaks with
// rational-function skirts, plus a low floor. Distinct fundamental per phone.
std::vector<double> make_template(int phone, int num_phones, int bins,
                                  Rng& rng) {
  std::vector<double> tpl(bins, 0.05);
  const double f0 =
      2.0 + (bins - 6.0) * (phone + 0.5) / num_phones;  // fundamental bin
  const double widths[3] = {1.0, 1.4, 1.8};
  const double amps[3] = {1.0, 0.55, 0.3};
  for (int h = 0; h < 3; ++h) {
    const double center = f0 * (h + 1);
    if (center > bins + 4) break;
    const double jitter = rng.uniform(0.9, 1.1);
    for (int b = 0; b < bins; ++b) {
      const double z = (b - center) / widths[h];
      tpl[b] += amps[h] * jitter / (1.0 + z * z);
    }
  }
  return tpl;
}

// L contiguous segments covering T frames, each at least two frames.
std::vector<int> segment_lengths(int frames, int count, Rng& rng) {
  std::vector<int> lens(count, 2);
  int rest = frames - 2 * count;
  for (int i = 0; i < rest; ++i) lens[rng.uniform_int(0, count - 1)] += 1;
  return lens;
}

Matrix render_source(const std::vector<int>& labels,
                     const std::vector<int>& seg_lens,
                     const std::vector<std::vector<double>>& templates,
                     double noise, Rng& rng) {
  int frames = 0;
  for (int l : seg_lens) frames += l;
  const int bins = static_cast<int>(templates.front().size());
  Matrix out(frames, bins);
  int t = 0;
  for (size_t seg = 0; seg < labels.size(); ++seg) {
    const std::vector<double>& tpl = templates[labels[seg]];
    for (int i = 0; i < seg_lens[seg]; ++i, ++t) {
      const double env = 0.75 + 0.5 * tri_wave(t, 16);
      double* row = out.row(t);
      for (int b = 0; b < bins; ++b) {
        row[b] = tpl[b] * env + noise * rng.uniform();
      }
    }
  }
  return out;
}

}  // namespace

Corpus synth_corpus(const CorpusConfig& cfg, uint64_t seed) {
  if (cfg.num_utterances < 1 || cfg.num_bins < 1 || cfg.visual_dim < 1 ||
      cfg.num_phones < 1) {
    throw InvalidConfigError("synth_corpus: counts must be positive");
  }
  if (cfg.labels_min < 1 || cfg.labels_min > cfg.labels_max) {
    throw InvalidConfigError("synth_corpus: bad label-count range");
  }
  if (cfg.t_min < 1 || cfg.t_min > cfg.t_max) {
    throw InvalidConfigError("synth_corpus: bad frame-count range");
  }
  // worst case needs a blank between every pair of labels
  if (2 * cfg.labels_max + 1 > cfg.t_max) {
    throw InvalidConfigError(
        "synth_corpus: labels_max " + std::to_string(cfg.labels_max) +
        " cannot fit in t_max " + std::to_string(cfg.t_max) +
        " (need t_max >= 2*labels_max + 1)");
  }
  if (cfg.interferer_gain < 0.0) {
    throw InvalidConfigError("synth_corpus: interferer_gain must be >= 0");
  }

  Rng rng(seed);
  std::vector<std::vector<double>> templates;
  templates.reserve(cfg.num_phones);
  for (int p = 0; p < cfg.num_phones; ++p) {
    templates.push_back(
        make_template(p, cfg.num_phones, cfg.num_bins, rng));
  }
  std::vector<std::vector<double>> visual_proto(cfg.num_phones);
  for (int p = 0; p < cfg.num_phones; ++p) {
    visual_proto[p].resize(cfg.visual_dim);
    for (int m = 0; m < cfg.visual_dim; ++m) {
      visual_proto[p][m] = rng.uniform(-1.0, 1.0);
    }
  }

  Corpus corpus;
  corpus.num_bins = cfg.num_bins;
  corpus.visual_dim = cfg.visual_dim;
  corpus.num_symbols = cfg.num_phones + 1;
  corpus.phone_names.reserve(cfg.num_phones);
  for (int p = 0; p < cfg.num_phones; ++p) {
    corpus.phone_names.push_back("p" + std::to_string(p));
  }

  for (int n = 0; n < cfg.num_utterances; ++n) {
    Utterance utt;
    utt.id = "utt" + std::to_string(n);

    const int num_labels = rng.uniform_int(cfg.labels_min, cfg.labels_max);
    const int frames =
        rng.uniform_int(std::max(cfg.t_min, 2 * num_labels + 1), cfg.t_max);

    std::vector<int> target_labels(num_labels);
    for (int& s : target_labels) s = rng.uniform_int(0, cfg.num_phones - 1);
    std::vector<int> target_segs = segment_lengths(frames, num_labels, rng);
    utt.clean.frames =
        render_source(target_labels, target_segs, templates,
                      cfg.noise_level, rng);
    utt.labels.symbols = target_labels;

    // the interferer is never transcribed; it only needs to fit its segments
    const int interferer_count = std::min(
        rng.uniform_int(cfg.labels_min, cfg.labels_max), frames / 2);
    std::vector<int> interferer_labels(interferer_count);
    for (int& s : interferer_labels) s = rng.uniform_int(0, cfg.num_phones - 1);
    std::vector<int> interferer_segs =
        segment_lengths(frames, interferer_count, rng);
    Matrix interferer = render_source(interferer_labels, interferer_segs,
                                      templates, cfg.noise_level, rng);
    CleanTarget scaled;
    scaled.frames = Matrix(frames, cfg.num_bins);
    for (size_t i = 0; i < interferer.data.size(); ++i) {
      scaled.frames.data[i] = cfg.interferer_gain * interferer.data[i];
    }

    utt.mixture.frames = Matrix(frames, cfg.num_bins);
    for (size_t i = 0; i < utt.mixture.frames.data.size(); ++i) {
      utt.mixture.frames.data[i] =
          utt.clean.frames.data[i] + scaled.frames.data[i];
    }
    utt.interferer_clean = std::move(scaled);

    // visual track: the target's phone prototype per frame, noised then
    // smoothed with a short moving average
    Matrix raw(frames, cfg.visual_dim);
    {
      int t = 0;
      for (size_t seg = 0; seg < target_labels.size(); ++seg) {
        const std::vector<double>& proto = visual_proto[target_labels[seg]];
        for (int i = 0; i < target_segs[seg]; ++i, ++t) {
          double* row = raw.row(t);
          for (int m = 0; m < cfg.visual_dim; ++m) {
            row[m] = proto[m] + cfg.visual_noise * rng.uniform(-1.0, 1.0);
          }
        }
      }
    }
    utt.visual.frames = Matrix(frames, cfg.visual_dim);
    constexpr int kHalf = 2;
    for (int t = 0; t < frames; ++t) {
      const int lo = std::max(0, t - kHalf);
      const int hi = std::min(frames - 1, t + kHalf);
      double* row = utt.visual.frames.row(t);
      for (int m = 0; m < cfg.visual_dim; ++m) {
        double acc = 0.0;
        for (int s = lo; s <= hi; ++s) acc += raw.at(s, m);
        row[m] = acc / (hi - lo + 1);
      }
    }

    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

void validate_corpus(const Corpus& corpus) {
  for (const Utterance& u : corpus.utterances) {
    const int frames = u.mixture.num_frames();
    auto fail = [&u](const std::string& what) {
      throw InvalidInputError("utterance " + u.id + ": " + what);
    };
    if (frames < 1 || u.mixture.num_bins() != corpus.num_bins) {
      fail("mixture shape mismatch");
    }
    if (u.clean.frames.rows != frames ||
        u.clean.frames.cols != corpus.num_bins) {
      fail("clean shape mismatch");
    }
    if (u.visual.frames.rows != frames ||
        u.visual.frames.cols != corpus.visual_dim) {
      fail("visual shape mismatch");
    }
    if (u.interferer_clean.has_value() &&
        (u.interferer_clean->frames.rows != frames ||
         u.interferer_clean->frames.cols != corpus.num_bins)) {
      fail("interferer shape mismatch");
    }
    if (u.labels.length() < 1) fail("empty label sequence");
    if (u.labels.length() >= frames) fail("more labels than frames allow");
    if (u.labels.min_frames() > frames) fail("labels infeasible for CTC");
    for (int s : u.labels.symbols) {
      if (s < 0 || s >= corpus.num_symbols - 1) fail("label id out of range");
    }
    for (double v : u.mixture.frames.data) {
      if (!(v >= 0.0)) fail("negative or non-finite mixture value");
    }
    for (double v : u.clean.frames.data) {
      if (!(v >= 0.0)) fail("negative or non-finite clean value");
    }
  }
}

}  // namespace avjoint
