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

#include "avjoint/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <utility>

#include "avjoint/error.hpp"
#include "avjoint/kernels.hpp"
#include "avjoint/rng.hpp"

namespace avjoint {

namespace {

/// Recognizer-only input straight from the corpus, mixture audio warped to
/// mel channels and/or the visual frames depending on the mode.
Matrix asr_only_input(const ModelConfig& cfg, const MelFilterbank& mel,
                      const Utterance& utt) {
  switch (cfg.asr_input_mode) {
    case AsrInputMode::kAudio:
      return mel_warp(mel, utt.mixture);
    case AsrInputMode::kVisual:
      return utt.visual.frames;
    case AsrInputMode::kAudioVisual: {
      const Matrix warped = mel_warp(mel, utt.mixture);
      const int T = warped.rows;
      if (utt.visual.num_frames() != T) {
        throw InvalidInputError("utterance " + utt.id +
                                ": visual frame count mismatch");
      }
      Matrix x(T, warped.cols + utt.visual.dim());
      for (int t = 0; t < T; ++t) {
        std::memcpy(x.row(t), warped.row(t), sizeof(double) * warped.cols);
        std::memcpy(x.row(t) + warped.cols, utt.visual.frames.row(t),
                    sizeof(double) * utt.visual.dim());
      }
      return x;
    }
  }
  throw Error("unreachable asr input mode");
}

struct JointEval {
  JointCache cache;
  LossValue enh;  // grad spans all enhancement streams
  LossValue asr;  // empty when CTC was not requested
};

JointEval joint_eval(const Model& model, const Utterance& utt,
                     bool with_ctc) {
  const ModelConfig& cfg = model.cfg;
  JointEval fe;
  if (cfg.enh_streams == 1) {
    fe.cache = joint_forward(cfg, model.store, utt, model.mel, model.d, 0);
    fe.enh = mse_loss(fe.cache.enh.y, utt.clean.frames);
  } else {
    // Oracle stream assignment: score both pairings, train through the
    // better one, and let the recognizer read whichever stream the target
    // speaker landed on.
    if (!utt.interferer_clean.has_value()) {
      throw InvalidInputError("utterance " + utt.id +
                              " lacks the interferer target two-stream "
                              "training needs");
    }
    EnhCache ec = enh_forward(cfg, model.store, enh_input(cfg, utt), model.d);
    const int T = ec.y.rows;
    const int N = cfg.num_bins;
    Matrix s0(T, N), s1(T, N);
    for (int t = 0; t < T; ++t) {
      std::memcpy(s0.row(t), ec.y.row(t), sizeof(double) * N);
      std::memcpy(s1.row(t), ec.y.row(t) + N, sizeof(double) * N);
    }
    const PitResult pit = pit_mse(
        {&s0, &s1}, {&utt.clean.frames, &utt.interferer_clean->frames});
    fe.enh.value = pit.value;
    fe.enh.grad = Matrix(T, 2 * N);
    for (int s = 0; s < 2; ++s) {
      for (int t = 0; t < T; ++t) {
        std::memcpy(fe.enh.grad.row(t) + s * N, pit.grads[s].row(t),
                    sizeof(double) * N);
      }
    }
    const int target_stream = pit.perm[0] == 0 ? 0 : 1;
    fe.cache = joint_complete(cfg, model.store, model.mel, std::move(ec),
                              target_stream);
  }
  if (with_ctc) fe.asr = ctc_loss(fe.cache.asr.logits, utt.labels);
  return fe;
}

GradStore zero_grads(const ModelConfig& cfg, Arch arch) {
  GradStore grads;
  for (const auto& [name, shape] : param_shapes(cfg, arch)) {
    grads.arrays.emplace(name, Matrix(shape.first, shape.second));
  }
  return grads;
}

}  // namespace

bool mask_includes(UpdateMask mask, const std::string& name) {
  switch (mask) {
    case UpdateMask::kAll: return true;
    case UpdateMask::kEnhOnly: return ParameterStore::is_enh(name);
    case UpdateMask::kAsrOnly: return !ParameterStore::is_enh(name);
  }
  return true;
}

AdamState AdamState::init(const ParameterStore& store) {
  AdamState state;
  for (const auto& [name, p] : store.arrays) {
    state.m.emplace(name, Matrix(p.rows, p.cols));
    state.v.emplace(name, Matrix(p.rows, p.cols));
  }
  return state;
}

double clip_gradients(GradStore* grads, UpdateMask mask, double clip_norm) {
  const auto& k = kernels::active();
  double total = 0.0;
  for (const auto& [name, g] : grads->arrays) {
    if (!mask_includes(mask, name)) continue;
    total += k.sumsq(g.data.data(), static_cast<int>(g.size()));
  }
  const double norm = std::sqrt(total);
  if (clip_norm > 0.0 && norm > clip_norm) {
    const double sc = clip_norm / norm;
    for (auto& [name, g] : grads->arrays) {
      if (!mask_includes(mask, name)) continue;
      k.scale(sc, g.data.data(), static_cast<int>(g.size()));
    }
  }
  return norm;
}

void adam_step(ParameterStore* store, AdamState* state, const GradStore& grads,
               const AdamConfig& cfg, UpdateMask mask) {
  // Validate every selected gradient before touching anything, so a bad one
  // never leaves a half-applied step behind.
  for (const auto& [name, p] : store->arrays) {
    if (!mask_includes(mask, name)) continue;
    const Matrix& g = grads.at(name);
    if (!g.same_shape(p)) {
      throw Error("adam_step: gradient shape mismatch for " + name);
    }
    if (!g.all_finite()) {
      throw NumericError("non-finite gradient for " + name);
    }
  }
  ++state->t;
  const double bc1 =
      1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(state->t)));
  const double bc2 =
      1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(state->t)));
  const auto& k = kernels::active();
  for (auto& [name, p] : store->arrays) {
    if (!mask_includes(mask, name)) continue;
    Matrix& m = state->m.at(name);
    Matrix& v = state->v.at(name);
    const Matrix& g = grads.at(name);
    k.adam_update(p.data.data(), m.data.data(), v.data.data(), g.data.data(),
                  static_cast<int>(p.size()), cfg.lr, cfg.beta1, cfg.beta2,
                  cfg.eps, bc1, bc2);
  }
}

EpochStats run_epoch(Model* model, const Corpus& train, Objective objective,
                     const JointLossConfig& jcfg, UpdateMask mask,
                     AdamState* adam, const AdamConfig& acfg,
                     uint64_t epoch_seed) {
  if (train.size() == 0) {
    throw InvalidInputError("run_epoch: empty training set");
  }
  std::vector<int> order(static_cast<size_t>(train.size()));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(epoch_seed);
  rng.shuffle(order);

  EpochStats stats;
  double sum_enh = 0.0;
  double sum_asr = 0.0;
  for (int idx : order) {
    const Utterance& utt = train.utterances[static_cast<size_t>(idx)];
    if (utt.labels.min_frames() > utt.num_frames()) {
      ++stats.skipped;
      continue;
    }
    GradStore grads;
    if (model->arch == Arch::kJoint) {
      const JointEval fe = joint_eval(*model, utt, true);
      sum_enh += fe.enh.value;
      sum_asr += fe.asr.value;
      const Matrix* dy = nullptr;
      const Matrix* dlogits = nullptr;
      JointLossResult jr;
      switch (objective) {
        case Objective::kEnh:
          dy = &fe.enh.grad;
          break;
        case Objective::kAsr:
          dlogits = &fe.asr.grad;
          break;
        case Objective::kJoint:
          jr = joint_loss(fe.enh, fe.asr, jcfg);
          dy = &jr.grad_enh;
          dlogits = &jr.grad_asr;
          break;
      }
      grads = joint_backward(model->cfg, model->store, model->mel, model->d,
                             fe.cache, dy, dlogits);
    } else {
      const AsrCache ac = asr_forward(
          model->cfg, model->store,
          asr_only_input(model->cfg, model->mel, utt));
      const LossValue asr = ctc_loss(ac.logits, utt.labels);
      sum_asr += asr.value;
      grads = zero_grads(model->cfg, Arch::kAsrOnly);
      asr_backward(model->cfg, model->store, ac, asr.grad, &grads, nullptr);
    }
    clip_gradients(&grads, mask, acfg.clip_norm);
    adam_step(&model->store, adam, grads, acfg, mask);
    ++stats.updates;
  }
  if (stats.updates == 0) {
    throw InvalidInputError("run_epoch: every utterance was skipped");
  }
  stats.train_enh = sum_enh / stats.updates;
  stats.train_asr = sum_asr / stats.updates;
  return stats;
}

EvalStats evaluate(const Model& model, const Corpus& corpus) {
  if (corpus.size() == 0) {
    throw InvalidInputError("evaluate: empty corpus");
  }
  EvalStats stats;
  double sum_enh = 0.0;
  double sum_asr = 0.0;
  int asr_n = 0;
  std::vector<std::vector<std::string>> refs, hyps;
  refs.reserve(static_cast<size_t>(corpus.size()));
  hyps.reserve(static_cast<size_t>(corpus.size()));
  for (const Utterance& utt : corpus.utterances) {
    const bool feasible = utt.labels.min_frames() <= utt.num_frames();
    const Matrix* logits = nullptr;
    JointEval fe;
    AsrCache ac;
    if (model.arch == Arch::kJoint) {
      fe = joint_eval(model, utt, feasible);
      sum_enh += fe.enh.value;
      logits = &fe.cache.asr.logits;
      if (feasible) {
        sum_asr += fe.asr.value;
        ++asr_n;
      }
    } else {
      ac = asr_forward(model.cfg, model.store,
                       asr_only_input(model.cfg, model.mel, utt));
      logits = &ac.logits;
      if (feasible) {
        sum_asr += ctc_loss(ac.logits, utt.labels).value;
        ++asr_n;
      }
    }
    if (!feasible) ++stats.asr_skipped;
    refs.push_back(ids_to_names(utt.labels.symbols, corpus.phone_names));
    hyps.push_back(
        ids_to_names(ctc_greedy_decode(*logits), corpus.phone_names));
  }
  stats.enh = model.arch == Arch::kJoint ? sum_enh / corpus.size() : 0.0;
  stats.asr = asr_n > 0 ? sum_asr / asr_n : 0.0;
  stats.per = score(refs, hyps).per;
  return stats;
}

bool PlateauDetector::update(double value) {
  if (!has_best_ || value < best_ * (1.0 - min_delta_)) {
    best_ = value;
    has_best_ = true;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

std::vector<EpochRecord> run_strategy(Model* model, const Corpus& train,
                                      const Corpus& valid,
                                      const ScheduleConfig& schedule,
                                      const EpochObserver& observer) {
  if (schedule.total_epochs < 1) {
    throw InvalidConfigError("run_strategy: total_epochs must be positive");
  }
  if (schedule.strategy == Strategy::kAlternated &&
      schedule.epochs_per_phase < 1) {
    throw InvalidConfigError("run_strategy: epochs_per_phase must be positive");
  }
  AdamState adam = AdamState::init(model->store);
  PlateauDetector plateau(schedule.plateau.patience,
                          schedule.plateau.min_delta);
  bool asr_phase = false;  // two-phase progress flag
  std::vector<EpochRecord> history;
  history.reserve(static_cast<size_t>(schedule.total_epochs));
  for (int e = 0; e < schedule.total_epochs; ++e) {
    std::string phase = "asr";
    Objective objective = Objective::kAsr;
    UpdateMask mask = UpdateMask::kAll;
    if (model->arch == Arch::kJoint) {
      switch (schedule.strategy) {
        case Strategy::kJointLoss:
          phase = "joint";
          objective = Objective::kJoint;
          break;
        case Strategy::kAlternated: {
          const bool enh_block = (e / schedule.epochs_per_phase) % 2 == 0;
          if (enh_block) {
            phase = "enh";
            objective = Objective::kEnh;
            mask = UpdateMask::kEnhOnly;
          } else if (schedule.freeze) {
            mask = UpdateMask::kAsrOnly;
          }
          break;
        }
        case Strategy::kTwoFullPhases:
          if (!asr_phase) {
            phase = "enh";
            objective = Objective::kEnh;
            mask = UpdateMask::kEnhOnly;
          } else if (schedule.freeze) {
            mask = UpdateMask::kAsrOnly;
          }
          break;
      }
    }
    const EpochStats st =
        run_epoch(model, train, objective, schedule.joint, mask, &adam,
                  schedule.adam, Rng::derive(schedule.seed, static_cast<uint64_t>(e)));
    const EvalStats ev = evaluate(*model, valid);
    EpochRecord r;
    r.epoch = e;
    r.phase = phase;
    // The lambda column reproduces the weight in effect: the fixed value,
    // or the adaptive rule applied to this epoch's mean training losses.
    // Outside joint phases no weight exists and the column records 0.
    if (phase == "joint") {
      r.lambda = schedule.joint.mode == JointLossConfig::Mode::kFixed
                     ? schedule.joint.lambda
                     : lambda_adapt(st.train_asr, st.train_enh);
    }
    r.train_enh = st.train_enh;
    r.train_asr = st.train_asr;
    r.valid_enh = ev.enh;
    r.valid_asr = ev.asr;
    r.valid_per = ev.per;
    history.push_back(r);
    if (observer) observer(*model, r);
    if (model->arch == Arch::kJoint &&
        schedule.strategy == Strategy::kTwoFullPhases && !asr_phase &&
        plateau.update(ev.enh)) {
      asr_phase = true;
    }
  }
  return history;
}

}  // namespace avjoint
