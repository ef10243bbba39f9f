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

#ifndef AVJOINT_TRAINING_HPP_
#define AVJOINT_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "avjoint/eval.hpp"
#include "avjoint/features.hpp"
#include "avjoint/losses.hpp"
#include "avjoint/net.hpp"

namespace avjoint {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global-norm clip, 0 disables
};

/// Which arrays an update may touch. Excluded arrays keep their values and
/// their optimizer moments, so a later unfrozen phase resumes cleanly.
enum class UpdateMask { kAll, kEnhOnly, kAsrOnly };

bool mask_includes(UpdateMask mask, const std::string& name);

struct AdamState {
  std::map<std::string, Matrix> m, v;
  int64_t t = 0;  // global step, shared by all arrays

  static AdamState init(const ParameterStore& store);
};

/// Scales the selected gradients so their joint norm is at most clip_norm.
/// Returns the norm before clipping.
double clip_gradients(GradStore* grads, UpdateMask mask, double clip_norm);

/// One Adam update over the arrays the mask selects. Throws NumericError
/// naming the first array whose gradient is non-finite; parameters are
/// untouched in that case.
void adam_step(ParameterStore* store, AdamState* state, const GradStore& grads,
               const AdamConfig& cfg, UpdateMask mask);

/// A model plus the fixed preprocessing it was trained with.
struct Model {
  Arch arch = Arch::kJoint;
  ModelConfig cfg;
  ParameterStore store;
  MelFilterbank mel;
  StdVector d;  // clean-target std vector; empty for recognizer-only models
};

/// What the per-utterance update differentiates. Both losses are always
/// evaluated; the objective only decides which gradients exist.
enum class Objective { kEnh, kAsr, kJoint };

struct EpochStats {
  double train_enh = 0.0;  // mean over updated utterances
  double train_asr = 0.0;
  int updates = 0;
  int skipped = 0;  // CTC-infeasible utterances left out
};

/// One pass over the training set: seeded shuffle, per-utterance forward,
/// objective gradient, masked Adam update. Utterances whose labels cannot
/// align to their frame count are skipped and counted.
EpochStats run_epoch(Model* model, const Corpus& train, Objective objective,
                     const JointLossConfig& jcfg, UpdateMask mask,
                     AdamState* adam, const AdamConfig& acfg,
                     uint64_t epoch_seed);

struct EvalStats {
  double enh = 0.0;
  double asr = 0.0;
  double per = 0.0;  // greedy-decode phone error rate, percent, unmapped
  int asr_skipped = 0;
};

EvalStats evaluate(const Model& model, const Corpus& corpus);

/// Plateau rule: a value counts as progress only when it beats the best seen
/// so far by the relative margin min_delta; `patience` consecutive epochs
/// without progress is a plateau.
class PlateauDetector {
 public:
  PlateauDetector(int patience, double min_delta)
      : patience_(patience), min_delta_(min_delta) {}

  /// Feeds one epoch's value; true once the plateau is reached.
  bool update(double value);

 private:
  int patience_;
  double min_delta_;
  double best_ = 0.0;
  bool has_best_ = false;
  int stale_ = 0;
};

struct PlateauConfig {
  int patience = 10;
  double min_delta = 0.005;
};

enum class Strategy { kJointLoss, kAlternated, kTwoFullPhases };

struct ScheduleConfig {
  Strategy strategy = Strategy::kJointLoss;
  int total_epochs = 0;
  uint64_t seed = 0;
  JointLossConfig joint;     // joint-loss strategy
  int epochs_per_phase = 1;  // alternated strategy, enhancer phase first
  bool freeze = false;       // recognizer phases leave the enhancer fixed
  PlateauConfig plateau;     // two-phase strategy's switch trigger
  AdamConfig adam;
};

/// Called after each epoch with the model as updated by it.
using EpochObserver =
    std::function<void(const Model& model, const EpochRecord& record)>;

/// Runs a full schedule and returns one record per epoch. Recognizer-only
/// models ignore the strategy and train every epoch on their CTC loss. The
/// two-phase strategy trains the enhancer until its validation loss
/// plateaus, then spends the remaining budget on the recognizer.
std::vector<EpochRecord> run_strategy(Model* model, const Corpus& train,
                                      const Corpus& valid,
                                      const ScheduleConfig& schedule,
                                      const EpochObserver& observer = {});

}  // namespace avjoint

#endif  // AVJOINT_TRAINING_HPP_
