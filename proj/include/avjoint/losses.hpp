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

#ifndef AVJOINT_LOSSES_HPP_
#define AVJOINT_LOSSES_HPP_

#include <array>
#include <vector>

#include "avjoint/matrix.hpp"
#include "avjoint/phones.hpp"

namespace avjoint {

/// A loss with its gradient w.r.t. the predicted quantity.
struct LossValue {
  double value = 0.0;
  Matrix grad;
};

/// CTC negative log-likelihood of the label sequence under softmax(logits),
/// forward-backward in log space. grad is w.r.t. the raw logits
/// (softmax minus label posterior), so each frame's gradient row sums to 0.
/// The blank is the last symbol id. An empty label sequence is legal and
/// scores the all-blank alignment. Throws InfeasibleAlignmentError when the
/// sequence needs more frames than logits provides.
LossValue ctc_loss(const Matrix& logits, const PhoneSequence& labels);

/// Mean squared error over all T*N entries; grad = 2(y_hat - y)/(T*N).
LossValue mse_loss(const Matrix& y_hat, const Matrix& y);

/// Permutation-invariant MSE over two predicted streams: the assignment of
/// streams to targets with the lower mean MSE wins, and gradients flow only
/// through that assignment. perm[s] is the target index stream s was
/// matched to; ties resolve to the identity.
struct PitResult {
  double value = 0.0;
  std::array<int, 2> perm{0, 1};
  std::array<Matrix, 2> grads;
};
PitResult pit_mse(const std::array<const Matrix*, 2>& streams,
                  const std::array<const Matrix*, 2>& targets);

/// Decade-ratio balancing coefficient:
///   10^floor(log10 l_asr) / 10^floor(log10 l_enh).
/// Nonpositive inputs are clamped to 1e-12 and flagged on stderr.
double lambda_adapt(double l_asr, double l_enh);

struct JointLossConfig {
  enum class Mode { kFixed, kAdaptive };
  Mode mode = Mode::kFixed;
  double lambda = 1.0;  // fixed mode only
};

/// Weighted combination lambda * enh + asr. In adaptive mode lambda is
/// recomputed from the raw loss values of this batch and treated as a
/// constant under differentiation. grad_enh carries the lambda scale;
/// grad_asr is passed through.
struct JointLossResult {
  double value = 0.0;
  double lambda = 1.0;
  Matrix grad_enh;
  Matrix grad_asr;
};
JointLossResult joint_loss(const LossValue& enh, const LossValue& asr,
                           const JointLossConfig& cfg);

}  // namespace avjoint

#endif  // AVJOINT_LOSSES_HPP_
