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

#include "avjoint/losses.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <string>

#include "avjoint/error.hpp"
#include "avjoint/kernels.hpp"

namespace avjoint {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

LossValue ctc_loss(const Matrix& logits, const PhoneSequence& labels) {
  const int frames = logits.rows;
  const int symbols = logits.cols;
  if (frames < 1 || symbols < 2) {
    throw InvalidInputError("ctc_loss: need T >= 1 and P >= 2");
  }
  const int blank = symbols - 1;
  for (int s : labels.symbols) {
    if (s < 0 || s >= blank) {
      throw InvalidInputError("ctc_loss: label id " + std::to_string(s) +
                              " outside [0, " + std::to_string(blank - 1) +
                              "]");
    }
  }
  if (labels.min_frames() > frames) {
    throw InfeasibleAlignmentError(
        "ctc_loss: labels need " + std::to_string(labels.min_frames()) +
        " frames but logits has " + std::to_string(frames));
  }
  if (!logits.all_finite()) {
    throw NumericError("ctc_loss: non-finite logits");
  }

  // log softmax per frame
  Matrix logp(frames, symbols);
  for (int t = 0; t < frames; ++t) {
    const double* row = logits.row(t);
    double hi = row[0];
    for (int p = 1; p < symbols; ++p) hi = std::max(hi, row[p]);
    double z = 0.0;
    for (int p = 0; p < symbols; ++p) z += std::exp(row[p] - hi);
    const double log_z = hi + std::log(z);
    double* out = logp.row(t);
    for (int p = 0; p < symbols; ++p) out[p] = row[p] - log_z;
  }

  // extended sequence: blank, l1, blank, l2, ..., blank
  const int L = labels.length();
  const int S = 2 * L + 1;
  auto ext = [&](int s) { return s % 2 == 0 ? blank : labels.symbols[s / 2]; };

  Matrix alpha(frames, S, kNegInf);
  alpha.at(0, 0) = logp.at(0, blank);
  if (S > 1) alpha.at(0, 1) = logp.at(0, ext(1));
  for (int t = 1; t < frames; ++t) {
    for (int s = 0; s < S; ++s) {
      double acc = alpha.at(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha.at(t - 1, s - 1));
      // the skip transition is barred into blanks and repeated labels
      if (s >= 2 && ext(s) != blank && ext(s) != ext(s - 2)) {
        acc = log_add(acc, alpha.at(t - 1, s - 2));
      }
      alpha.at(t, s) = acc + logp.at(t, ext(s));
    }
  }

  double log_total = alpha.at(frames - 1, S - 1);
  if (S > 1) log_total = log_add(log_total, alpha.at(frames - 1, S - 2));
  if (log_total == kNegInf) {
    // alignments exist per the feasibility check; probabilities underflowed
    throw NumericError("ctc_loss: total path probability underflowed");
  }

  Matrix beta(frames, S, kNegInf);
  beta.at(frames - 1, S - 1) = logp.at(frames - 1, blank);
  if (S > 1) beta.at(frames - 1, S - 2) = logp.at(frames - 1, ext(S - 2));
  for (int t = frames - 2; t >= 0; --t) {
    for (int s = S - 1; s >= 0; --s) {
      double acc = beta.at(t + 1, s);
      if (s + 1 < S) acc = log_add(acc, beta.at(t + 1, s + 1));
      if (s + 2 < S && ext(s + 2) != blank && ext(s + 2) != ext(s)) {
        acc = log_add(acc, beta.at(t + 1, s + 2));
      }
      beta.at(t, s) = acc + logp.at(t, ext(s));
    }
  }

  // grad = softmax - posterior; alpha*beta double-counts logp[t][sym],
  // so it is divided back out
  LossValue out;
  out.value = -log_total;
  out.grad = Matrix(frames, symbols);
  for (int t = 0; t < frames; ++t) {
    std::vector<double> log_gamma(symbols, kNegInf);
    for (int s = 0; s < S; ++s) {
      const int sym = ext(s);
      log_gamma[sym] = log_add(log_gamma[sym],
                               alpha.at(t, s) + beta.at(t, s) -
                                   logp.at(t, sym));
    }
    double* g = out.grad.row(t);
    for (int p = 0; p < symbols; ++p) {
      const double softmax = std::exp(logp.at(t, p));
      const double posterior =
          log_gamma[p] == kNegInf ? 0.0 : std::exp(log_gamma[p] - log_total);
      g[p] = softmax - posterior;
    }
  }
  return out;
}

LossValue mse_loss(const Matrix& y_hat, const Matrix& y) {
  if (!y_hat.same_shape(y)) {
    throw InvalidInputError("mse_loss: shape mismatch");
  }
  if (y_hat.size() == 0) {
    throw InvalidInputError("mse_loss: empty input");
  }
  const int n = static_cast<int>(y_hat.size());
  LossValue out;
  out.value =
      kernels::active().sumsq_diff(y_hat.data.data(), y.data.data(), n) / n;
  out.grad = Matrix(y_hat.rows, y_hat.cols);
  const double scale = 2.0 / n;
  for (int i = 0; i < n; ++i) {
    out.grad.data[i] = scale * (y_hat.data[i] - y.data[i]);
  }
  return out;
}

PitResult pit_mse(const std::array<const Matrix*, 2>& streams,
                  const std::array<const Matrix*, 2>& targets) {
  for (const Matrix* m : streams) {
    if (m == nullptr || !m->same_shape(*streams[0]) ||
        !m->same_shape(*targets[0])) {
      throw InvalidInputError("pit_mse: stream/target shape mismatch");
    }
  }
  for (const Matrix* m : targets) {
    if (m == nullptr || !m->same_shape(*targets[0])) {
      throw InvalidInputError("pit_mse: stream/target shape mismatch");
    }
  }

  const LossValue l00 = mse_loss(*streams[0], *targets[0]);
  const LossValue l11 = mse_loss(*streams[1], *targets[1]);
  const LossValue l01 = mse_loss(*streams[0], *targets[1]);
  const LossValue l10 = mse_loss(*streams[1], *targets[0]);

  const double identity = 0.5 * (l00.value + l11.value);
  const double swapped = 0.5 * (l01.value + l10.value);

  PitResult out;
  if (identity <= swapped) {
    out.value = identity;
    out.perm = {0, 1};
    out.grads = {l00.grad, l11.grad};
  } else {
    out.value = swapped;
    out.perm = {1, 0};
    out.grads = {l01.grad, l10.grad};
  }
  for (Matrix& g : out.grads) {
    kernels::active().scale(0.5, g.data.data(), static_cast<int>(g.size()));
  }
  return out;
}

double lambda_adapt(double l_asr, double l_enh) {
  auto clamp = [](double v, const char* which) {
    if (v > 0.0) return v;
    std::cerr << "avjoint: lambda_adapt got nonpositive " << which << " ("
              << v << "); clamping to 1e-12\n";
    return 1e-12;
  };
  const double a = clamp(l_asr, "asr loss");
  const double e = clamp(l_enh, "enhancement loss");
  const double exp_a = std::floor(std::log10(a));
  const double exp_e = std::floor(std::log10(e));
  return std::pow(10.0, exp_a - exp_e);
}

JointLossResult joint_loss(const LossValue& enh, const LossValue& asr,
                           const JointLossConfig& cfg) {
  if (!std::isfinite(enh.value) || !std::isfinite(asr.value)) {
    throw NumericError("joint_loss: non-finite component loss");
  }
  JointLossResult out;
  out.lambda = cfg.mode == JointLossConfig::Mode::kAdaptive
                   ? lambda_adapt(asr.value, enh.value)
                   : cfg.lambda;
  out.value = out.lambda * enh.value + asr.value;
  out.grad_enh = enh.grad;
  kernels::active().scale(out.lambda, out.grad_enh.data.data(),
                          static_cast<int>(out.grad_enh.size()));
  out.grad_asr = asr.grad;
  return out;
}

}  // namespace avjoint
