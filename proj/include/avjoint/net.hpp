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

#ifndef AVJOINT_NET_HPP_
#define AVJOINT_NET_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "avjoint/features.hpp"
#include "avjoint/matrix.hpp"

namespace avjoint {

enum class AsrInputMode { kAudio, kAudioVisual, kVisual };

enum class Arch { kJoint, kAsrOnly };

struct ModelConfig {
  int z_enh = 2;        // enhancement BLSTM layers
  int z_asr = 2;        // recognizer BLSTM layers
  int hidden = 32;      // units per direction
  int num_bins = 0;     // N
  int visual_dim = 0;   // M
  int mel_channels = 0; // C
  int num_symbols = 0;  // P, including blank
  double k = 3.0;       // head scale on sigma(.) * k * d
  AsrInputMode asr_input_mode = AsrInputMode::kAudio;
  int enh_streams = 1;         // 2 for permutation-invariant training
  bool enh_uses_visual = true; // false for the PIT variant

  /// Throws InvalidConfigError on impossible combinations.
  void validate(Arch arch) const;
};

/// Width of the recognizer input for this configuration. The joint model
/// always feeds the recognizer mel-warped enhanced audio.
int asr_input_width(const ModelConfig& cfg, Arch arch);

/// Width of the enhancement input (mixture bins plus visual dims unless the
/// visual stream is removed).
int enh_input_width(const ModelConfig& cfg);

// Trainable arrays, keyed by name. The "enh." / "asr." prefixes partition
// the store; every array belongs to exactly one side. Gradient stores
// mirror the layout.
struct ParameterStore {
  std::map<std::string, Matrix> arrays;

  static bool is_enh(const std::string& name) {
    return name.rfind("enh.", 0) == 0;
  }
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
};
using GradStore = ParameterStore;

/// Expected array shapes for a configuration: name -> (rows, cols).
std::map<std::string, std::pair<int, int>> param_shapes(const ModelConfig& cfg,
                                                        Arch arch);

/// Seeded init: uniform(-a, a) with a = 1/sqrt(fan_in); forget-gate biases
/// start at 1, every other bias at 0.
ParameterStore init_params(const ModelConfig& cfg, Arch arch, uint64_t seed);

enum class Direction { kForward, kBackward };

// Per-layer, per-direction activations recorded by the forward pass; the
// backward pass reconstructs every local derivative from these.
struct LstmCache {
  Matrix i, f, g, o;  // gate activations, T x H, input time order
  Matrix c, tanh_c;   // cell state and its tanh
  Matrix h;           // outputs, T x H
};

struct BlstmCache {
  LstmCache fwd, bwd;
  Matrix h;  // T x 2H, forward half then backward half
};

struct LstmParamsView {
  const Matrix* wx;  // 4H x F, gate row blocks ordered i, f, g, o
  const Matrix* wh;  // 4H x H
  const Matrix* b;   // 1 x 4H
};

LstmCache lstm_forward(const LstmParamsView& p, const Matrix& x,
                       Direction dir);
/// dh is the upstream gradient on h (input time order). Accumulates into
/// dwx/dwh/db, writes dx (zeroed here).
void lstm_backward(const LstmParamsView& p, const Matrix& x,
                   const LstmCache& cache, Direction dir, const Matrix& dh,
                   Matrix* dwx, Matrix* dwh, Matrix* db, Matrix* dx);

BlstmCache blstm_forward(const LstmParamsView& fwd, const LstmParamsView& bwd,
                         const Matrix& x);

struct AsrCache {
  Matrix input;
  std::vector<BlstmCache> layers;
  Matrix logits;  // T x P
};

struct EnhCache {
  Matrix input;
  std::vector<BlstmCache> layers;
  Matrix sig;  // head sigmoid activations, T x (streams*N)
  Matrix y;    // sig * (k*d), T x (streams*N)
};

struct JointCache {
  EnhCache enh;
  Matrix asr_input;  // mel-warped selected stream, T x C
  AsrCache asr;
  int asr_stream = 0;  // which enhancement stream fed the recognizer
};

AsrCache asr_forward(const ModelConfig& cfg, const ParameterStore& store,
                     const Matrix& input);
/// Gradients go into `grads` (created or accumulated); with dinput non-null
/// the gradient w.r.t. the stack input is produced as well.
void asr_backward(const ModelConfig& cfg, const ParameterStore& store,
                  const AsrCache& cache, const Matrix& dlogits,
                  GradStore* grads, Matrix* dinput);

EnhCache enh_forward(const ModelConfig& cfg, const ParameterStore& store,
                     const Matrix& x, const StdVector& d);
void enh_backward(const ModelConfig& cfg, const ParameterStore& store,
                  const StdVector& d, const EnhCache& cache, const Matrix& dy,
                  GradStore* grads, Matrix* dx);

/// Assembles the enhancement stack input from an utterance: mixture bins,
/// then the visual frames unless the config drops them.
Matrix enh_input(const ModelConfig& cfg, const Utterance& utt);

/// Finishes a joint pass from an enhancement cache: warps stream
/// `asr_stream` through the filterbank and runs the recognizer on it. Split
/// out so the stream can be chosen after the enhancement output is known
/// (permutation-invariant training picks the one matched to the target).
JointCache joint_complete(const ModelConfig& cfg, const ParameterStore& store,
                          const MelFilterbank& mel, EnhCache enh,
                          int asr_stream);

/// Enhancement then mel warp then recognition. With two enhancement
/// streams, asr_stream picks the one the recognizer reads.
JointCache joint_forward(const ModelConfig& cfg, const ParameterStore& store,
                         const Utterance& utt, const MelFilterbank& mel,
                         const StdVector& d, int asr_stream = 0);

/// Backward through the joint composition. Either upstream may be null;
/// the recognizer gradient flows through the mel warp into the enhancement
/// stack regardless of which loss produced it.
GradStore joint_backward(const ModelConfig& cfg, const ParameterStore& store,
                         const MelFilterbank& mel, const StdVector& d,
                         const JointCache& cache, const Matrix* dy,
                         const Matrix* dlogits);

struct GradCheckReport {
  std::map<std::string, double> per_array;  // max relative error per array
  double max_rel_err = 0.0;
  std::string worst_array;
  double tolerance = 0.0;
  bool passed = false;
};

/// Central-difference verification of `analytic` against `loss_fn`,
/// step 1e-5 scaled by parameter magnitude. The relative error uses
/// |a - fd| / max(|a|, |fd|, 1e-2) so near-zero gradients are judged on an
/// absolute scale where difference noise dominates.
GradCheckReport grad_check(
    const std::function<double(const ParameterStore&)>& loss_fn,
    const ParameterStore& store, const GradStore& analytic, double tolerance);

// Checkpoint file: a JSON manifest (arch, config, d, array names/shapes/
// partitions, caller echo) followed by the arrays as little-endian f64 in
// manifest order.
struct Checkpoint {
  Arch arch = Arch::kJoint;
  ModelConfig cfg;
  ParameterStore store;
  StdVector d;
  std::string echo;  // JSON text recorded by the caller
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace avjoint

#endif  // AVJOINT_NET_HPP_
